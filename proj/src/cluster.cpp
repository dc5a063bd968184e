#include "gsd/cluster.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include <json.hpp>

#include "gsd/error.hpp"
#include "gsd/prefilter.hpp"

namespace gsd {

std::vector<int> dbscan(const EmbeddingMatrix& points, double eps, int min_pts, kernels::Exec exec) {
  if (points.rows() == 0) throw Error(Errc::EmptyInput, "dbscan on zero points");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::InvalidArgument, "eps must be in (0, 1)");
  if (min_pts < 2) throw Error(Errc::InvalidArgument, "min_pts must be >= 2");

  const auto neighbors = kernels::eps_neighbors(points, eps, exec);
  const std::size_t n = points.rows();
  auto is_core = [&](std::size_t i) { return neighbors[i].size() >= static_cast<std::size_t>(min_pts); };

  std::vector<int> labels(n, kNoise);
  int next_id = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kNoise || !is_core(i)) continue;
    const int id = next_id++;
    labels[i] = id;
    frontier.assign(1, i);
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      for (std::uint32_t q : neighbors[p]) {
        if (labels[q] != kNoise) continue;
        labels[q] = id;
        if (is_core(q)) frontier.push_back(q);
      }
    }
  }
  return labels;
}

std::vector<int> dbscan(std::span<const EmbeddingVector> points, double eps, int min_pts, kernels::Exec exec) {
  return dbscan(EmbeddingMatrix(points), eps, min_pts, exec);
}

bool MatchingRule::matches(const DomainName& d) const {
  if (tld && d.tld != *tld) return false;
  if (e2ld && d.e2ld != *e2ld) return false;
  if (num && d.fqdn.size() != *num) return false;
  return true;
}

std::string to_json(const MatchingRule& rule) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (rule.tld) j["tld"] = *rule.tld;
  if (rule.e2ld) j["e2ld"] = *rule.e2ld;
  if (rule.num) j["num"] = *rule.num;
  return j.dump();
}

std::optional<MatchingRule> generate_rule(std::span<const DomainName> members) {
  if (members.empty()) return std::nullopt;
  const DomainName& first = members.front();
  auto all = [&](auto&& same) { return std::all_of(members.begin(), members.end(), same); };
  MatchingRule rule;
  if (all([&](const DomainName& d) { return d.tld == first.tld; })) rule.tld = first.tld;
  if (all([&](const DomainName& d) { return d.e2ld == first.e2ld; })) rule.e2ld = first.e2ld;
  if (all([&](const DomainName& d) { return d.fqdn.size() == first.fqdn.size(); })) rule.num = first.fqdn.size();
  if (rule.empty()) return std::nullopt;
  return rule;
}

Step1Result run_step1(std::span<const IngestRecord> ti, Embedder& embedder, double eps, int min_pts) {
  Step1Result result;
  result.stats.input = ti.size();

  std::vector<DomainName> unique;
  std::unordered_set<std::string> seen;
  for (const auto& rec : ti) {
    if (!filter_domain(rec.domain).keep) {
      ++result.stats.filtered;
      continue;
    }
    if (seen.insert(rec.domain.fqdn).second) unique.push_back(rec.domain);
  }
  result.stats.unique = unique.size();
  if (unique.empty()) throw Error(Errc::EmptyInput, "no threat-intelligence domains left after filtering");

  std::vector<std::string> names;
  names.reserve(unique.size());
  for (const auto& d : unique) names.push_back(d.fqdn);
  auto vectors = embedder.embed(names);
  const auto labels = dbscan(std::span<const EmbeddingVector>(vectors), eps, min_pts);

  const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  result.clusters.resize(static_cast<std::size_t>(std::max(n_clusters, 0)));
  std::vector<std::vector<std::size_t>> member_index(result.clusters.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) {
      ++result.stats.noise;
      continue;
    }
    member_index[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < result.clusters.size(); ++c) {
    Cluster& cl = result.clusters[c];
    cl.cluster_id = static_cast<int>(c);
    for (std::size_t i : member_index[c]) {
      cl.members.push_back(unique[i]);
      result.reference_domains.push_back(unique[i]);
      result.reference_clusters.push_back(cl.cluster_id);
      result.reference_vectors.push_back(std::move(vectors[i]));
    }
    cl.rule = generate_rule(cl);
  }
  result.stats.clustered = result.reference_domains.size();
  return result;
}

}  // namespace gsd
