#pragma once

// Independent reference implementations used only by tests. They share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsd/cluster.hpp"
#include "gsd/embedding.hpp"

namespace oracle {

/// Cosine similarity written out directly.
inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) uv += u[i] * v[i];
  for (double x : u) uu += x * x;
  for (double x : v) vv += x * x;
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

inline std::vector<double> values(const gsd::EmbeddingVector& v) { return {v.values().begin(), v.values().end()}; }

/// Textbook DBSCAN over a full distance matrix, visiting points in order.
inline std::vector<int> dbscan(const std::vector<std::vector<double>>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[i][j] = 1.0 - cosine(pts[i], pts[j]);
  }
  auto region = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q) {
      if (dist[p][q] <= eps) out.push_back(q);
    }
    return out;
  };
  constexpr int kUndefined = -2, kNoise = -1;
  std::vector<int> label(n, kUndefined);
  int c = -1;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUndefined) continue;
    const auto nb = region(p);
    if (static_cast<int>(nb.size()) < min_pts) {
      label[p] = kNoise;
      continue;
    }
    label[p] = ++c;
    std::deque<std::size_t> seeds(nb.begin(), nb.end());
    while (!seeds.empty()) {
      const std::size_t q = seeds.front();
      seeds.pop_front();
      if (label[q] == kNoise) label[q] = c;
      if (label[q] != kUndefined) continue;
      label[q] = c;
      const auto nq = region(q);
      if (static_cast<int>(nq.size()) >= min_pts) seeds.insert(seeds.end(), nq.begin(), nq.end());
    }
  }
  for (auto& l : label) {
    if (l == kUndefined) l = kNoise;
  }
  return label;
}

/// Full-matrix optimal string alignment distance.
inline std::size_t osa(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  }
  return d[n][m];
}

struct RefRow {
  std::string domain;
  int cluster = 0;
  std::vector<double> vec;
};

struct Verdict {
  std::string verdict;  // "gsd" | "rejected_by_rule" | "not_similar"
  std::vector<std::pair<std::string, double>> matches;
  std::optional<int> nearest;
};

/// O(mn) detector: threshold, count, top-1 rule.
inline Verdict detect(const std::vector<double>& u, const gsd::DomainName& d, const std::vector<RefRow>& refs,
                      const std::map<int, std::optional<gsd::MatchingRule>>& rules, double t, int k) {
  Verdict v;
  for (const auto& r : refs) {
    const double s = cosine(u, r.vec);
    if (s >= t) v.matches.emplace_back(r.domain, s);
  }
  std::sort(v.matches.begin(), v.matches.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (!v.matches.empty()) {
    for (const auto& r : refs) {
      if (r.domain == v.matches.front().first) v.nearest = r.cluster;
    }
  }
  if (static_cast<int>(v.matches.size()) < k) {
    v.verdict = "not_similar";
    return v;
  }
  const auto it = rules.find(*v.nearest);
  bool ok = true;
  if (it != rules.end() && it->second) {
    const auto& rule = *it->second;
    if (rule.tld && d.tld != *rule.tld) ok = false;
    if (rule.e2ld && d.e2ld != *rule.e2ld) ok = false;
    if (rule.num && d.fqdn.size() != *rule.num) ok = false;
  }
  v.verdict = ok ? "gsd" : "rejected_by_rule";
  return v;
}

/// Public-suffix lookup following the published algorithm, over raw list text.
class Psl {
 public:
  explicit Psl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto ws = line.find_first_of(" \t\r");
      if (ws != std::string::npos) line.resize(ws);
      if (line.empty() || line.starts_with("//")) continue;
      if (std::any_of(line.begin(), line.end(), [](unsigned char c) { return c >= 0x80; })) continue;
      rules_.insert(line);
    }
  }

  /// Number of labels in the public suffix of `name`.
  std::size_t suffix_labels(const std::string& name) const {
    std::vector<std::string> labels;
    std::stringstream ss(name);
    std::string l;
    while (std::getline(ss, l, '.')) labels.push_back(l);
    std::size_t best = 1;  // implicit "*"
    for (std::size_t take = 1; take <= labels.size(); ++take) {
      std::string cand;
      for (std::size_t i = labels.size() - take; i < labels.size(); ++i) cand += (cand.empty() ? "" : ".") + labels[i];
      if (rules_.count("!" + cand)) return take - 1;
      if (rules_.count(cand)) best = std::max(best, take);
      std::string wild = "*";
      for (std::size_t i = labels.size() - take + 1; i < labels.size(); ++i) wild += "." + labels[i];
      if (take >= 2 && rules_.count(wild)) best = std::max(best, take);
    }
    return best;
  }

 private:
  std::set<std::string> rules_;
};

/// Random unit vectors around `centers` planted clusters plus uniform noise.
inline std::vector<gsd::EmbeddingVector> clustered_vectors(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                                           std::size_t centers, double spread) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> c(centers, std::vector<double>(dim));
  for (auto& v : c) {
    for (auto& x : v) x = g(rng);
  }
  std::vector<gsd::EmbeddingVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    if (centers > 0 && i % 5 != 0) {
      const auto& base = c[rng() % centers];
      double bn = 0.0;
      for (double x : base) bn += x * x;
      bn = std::sqrt(bn);
      for (std::size_t d = 0; d < dim; ++d) v[d] = base[d] / bn + spread * g(rng) / std::sqrt(static_cast<double>(dim));
    } else {
      for (auto& x : v) x = g(rng);
    }
    out.push_back(gsd::EmbeddingVector::from_raw(std::move(v)));
  }
  return out;
}

}  // namespace oracle
