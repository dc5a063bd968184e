#include "gsd/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <set>

#include <json.hpp>

#include "gsd/error.hpp"

namespace gsd {

double mean_pairwise_edit_distance_serial(std::span<const std::string> names) {
  const std::size_t n = names.size();
  if (n < 2) return 0.0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total += damerau_levenshtein(names[i], names[j]);
  }
  return static_cast<double>(total) / static_cast<double>(n * (n - 1) / 2);
}

double mean_pairwise_edit_distance_omp(std::span<const std::string> names) {
  const std::size_t n = names.size();
  if (n < 2) return 0.0;
  std::uint64_t total = 0;
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : total)
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      total += damerau_levenshtein(names[static_cast<std::size_t>(i)], names[j]);
    }
  }
  return static_cast<double>(total) / static_cast<double>(n * (n - 1) / 2);
}

std::string to_json_line(const ClusterReport& r) {
  nlohmann::ordered_json j;
  j["cluster_id"] = r.cluster_id;
  j["size"] = r.size;
  j["duration_days"] = r.duration_days;
  j["avg_edit_distance"] = r.avg_edit_distance;
  j["distinct_ips"] = r.distinct_ips;
  j["no_a_records"] = r.no_a_records;
  j["brands"] = r.brands;
  return j.dump();
}

ClusterMetadata ClusterMetadata::from_records(std::span<const IngestRecord> records) {
  ClusterMetadata meta;
  for (const auto& rec : records) {
    const std::string& key = rec.domain.fqdn;
    if (rec.first_seen) {
      auto [it, fresh] = meta.first_seen.emplace(key, *rec.first_seen);
      if (!fresh && *rec.first_seen < it->second) it->second = *rec.first_seen;
    }
    if (rec.ips) {
      auto& ips = meta.a_records[key];
      for (const auto& ip : *rec.ips) {
        if (std::find(ips.begin(), ips.end(), ip) == ips.end()) ips.push_back(ip);
      }
    }
    if (rec.brand && !rec.brand->empty()) meta.brand.emplace(key, *rec.brand);
  }
  return meta;
}

std::vector<ClusterReport> analyze_clusters(std::span<const Cluster> clusters, const ClusterMetadata& meta) {
  std::vector<ClusterReport> out;
  for (const auto& c : clusters) {
    ClusterReport r;
    r.cluster_id = c.cluster_id;
    r.size = c.members.size();

    std::optional<Timestamp> earliest, latest;
    bool missing = false;
    for (const auto& m : c.members) {
      auto it = meta.first_seen.find(m.fqdn);
      if (it == meta.first_seen.end()) {
        missing = true;
        break;
      }
      if (!earliest || it->second < *earliest) earliest = it->second;
      if (!latest || it->second > *latest) latest = it->second;
    }
    if (missing || !earliest) {
      warn(std::string(errc_name(Errc::MissingFirstSeen)) + ": skipping cluster " + std::to_string(c.cluster_id));
      continue;
    }
    r.duration_days = (*latest - *earliest).count() / 86'400;

    std::vector<std::string> names;
    std::set<std::string> ips;
    for (const auto& m : c.members) {
      names.push_back(m.fqdn);
      if (auto it = meta.a_records.find(m.fqdn); it != meta.a_records.end()) ips.insert(it->second.begin(), it->second.end());
      if (auto it = meta.brand.find(m.fqdn); it != meta.brand.end()) ++r.brands[it->second];
    }
    r.avg_edit_distance = mean_pairwise_edit_distance_omp(names);
    r.distinct_ips = ips.size();
    r.no_a_records = ips.empty();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRow> eval_sweep(std::span<const EmbeddingVector> vectors, std::span<const bool> labels,
                                 std::span<const double> eps_values, int min_pts) {
  if (vectors.size() != labels.size()) throw Error(Errc::InvalidArgument, "vectors and labels differ in length");
  if (vectors.empty()) throw Error(Errc::EmptyInput, "no labeled domains");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0 || positives == labels.size()) throw Error(Errc::DegenerateLabels, "labels are all one class");
  if (!std::is_sorted(eps_values.begin(), eps_values.end())) throw Error(Errc::InvalidArgument, "eps values must ascend");

  const EmbeddingMatrix m(vectors);
  std::vector<SweepRow> rows;
  for (double eps : eps_values) {
    const auto cl = dbscan(m, eps, min_pts);
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
      const bool predicted = cl[i] != kNoise;
      if (predicted && labels[i]) ++tp;
      else if (predicted) ++fp;
      else if (labels[i]) ++fn;
      else ++tn;
    }
    SweepRow row;
    row.eps = eps;
    row.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    row.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    row.accuracy = static_cast<double>(tp + tn) / static_cast<double>(cl.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> eval_sweep(std::span<const LabeledDomain> labeled, Embedder& embedder,
                                 std::span<const double> eps_values, int min_pts) {
  std::vector<std::string> names;
  // std::vector<bool> is not contiguous, so labels live in a plain array.
  auto labels = std::make_unique<bool[]>(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    names.push_back(labeled[i].domain);
    labels[i] = labeled[i].is_gsd;
  }
  const auto vectors = embedder.embed(names);
  return eval_sweep(vectors, std::span<const bool>(labels.get(), labeled.size()), eps_values, min_pts);
}

std::string sweep_tsv(std::span<const SweepRow> rows) {
  std::string out = "eps\tprecision\trecall\taccuracy\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g\t%.4f\t%.4f\t%.4f\n", r.eps, r.precision, r.recall, r.accuracy);
    out += buf;
  }
  return out;
}

namespace {

bool mentions_brand(const DomainName& d, std::span<const std::string> brands, const GuidelineOptions& opts) {
  const std::string_view body = d.without_tld();
  for (const auto& b : brands) {
    if (b.empty()) continue;
    if (body.find(b) != std::string_view::npos) return true;
    if (b.size() >= opts.min_brand_substring) {
      // Any longer shared substring contains one of exactly this length.
      for (std::size_t i = 0; i + opts.min_brand_substring <= b.size(); ++i) {
        if (body.find(std::string_view(b).substr(i, opts.min_brand_substring)) != std::string_view::npos) return true;
      }
    }
    // Labels, and the hyphen-separated pieces of each label ("amaozm-co-jp").
    for (const auto& label : d.labels) {
      std::size_t start = 0;
      for (;;) {
        const std::size_t end = label.find('-', start);
        const std::string_view piece = std::string_view(label).substr(start, end - start);
        if (damerau_levenshtein_bounded(piece, b, opts.max_brand_label_distance) <= opts.max_brand_label_distance ||
            damerau_levenshtein_bounded(label, b, opts.max_brand_label_distance) <= opts.max_brand_label_distance) {
          return true;
        }
        if (end == std::string::npos) break;
        start = end + 1;
      }
    }
  }
  return false;
}

std::vector<std::pair<std::size_t, char>> separator_layout(std::string_view s) {
  std::vector<std::pair<std::size_t, char>> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '.' || s[i] == '-') out.emplace_back(i, s[i]);
  }
  return out;
}

}  // namespace

GuidelineResult guideline_match(std::span<const DomainName> domains, std::span<const std::string> brands,
                                const GuidelineOptions& opts) {
  if (domains.size() < 3) throw Error(Errc::SetTooSmall, "guideline check needs at least three names");
  GuidelineResult r;

  r.common_brand = std::all_of(domains.begin(), domains.end(),
                               [&](const DomainName& d) { return mentions_brand(d, brands, opts); });

  auto spread = [&](auto&& len) {
    std::size_t lo = len(domains.front()), hi = lo;
    for (const auto& d : domains) {
      lo = std::min(lo, len(d));
      hi = std::max(hi, len(d));
    }
    return hi - lo;
  };
  r.similar_length = spread([](const DomainName& d) { return d.without_tld().size(); }) <= opts.max_length_difference &&
                     spread([](const DomainName& d) { return d.subdomain().size(); }) <= opts.max_length_difference;

  const bool deep = std::any_of(domains.begin(), domains.end(),
                                [](const DomainName& d) { return d.subdomain_labels.size() > 2; });
  r.same_subdomain_depth =
      !deep || std::all_of(domains.begin(), domains.end(), [&](const DomainName& d) {
        return d.subdomain_labels.size() == domains.front().subdomain_labels.size();
      });

  const auto layout = separator_layout(domains.front().without_tld());
  r.same_separators = std::all_of(domains.begin(), domains.end(),
                                  [&](const DomainName& d) { return separator_layout(d.without_tld()) == layout; });
  return r;
}

}  // namespace gsd
