#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsd/cluster.hpp"
#include "gsd/edit_distance.hpp"
#include "gsd/embedding.hpp"
#include "gsd/ingestion.hpp"
#include "gsd/kernels.hpp"

namespace gsd {

/// Mean Damerau-Levenshtein distance over all unordered pairs; 0 for < 2 names.
double mean_pairwise_edit_distance_serial(std::span<const std::string> names);
double mean_pairwise_edit_distance_omp(std::span<const std::string> names);

struct ClusterReport {
  int cluster_id = 0;
  std::size_t size = 0;
  std::int64_t duration_days = 0;
  double avg_edit_distance = 0.0;
  std::size_t distinct_ips = 0;
  bool no_a_records = false;
  std::map<std::string, std::size_t> brands;  // brand -> count
};

std::string to_json_line(const ClusterReport& r);

struct ClusterMetadata {
  std::unordered_map<std::string, Timestamp> first_seen;
  std::unordered_map<std::string, std::vector<std::string>> a_records;
  std::unordered_map<std::string, std::string> brand;

  /// Earliest first_seen, union of ips, first non-empty brand per domain.
  static ClusterMetadata from_records(std::span<const IngestRecord> records);
};

/// Clusters with a member lacking a first-seen time are skipped with a warning.
std::vector<ClusterReport> analyze_clusters(std::span<const Cluster> clusters, const ClusterMetadata& meta);

struct SweepRow {
  double eps = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

struct LabeledDomain {
  std::string domain;
  bool is_gsd = false;
};

/// Clusters every domain at each eps; "clustered" is the positive prediction.
/// Throws DegenerateLabels when all labels are equal.
std::vector<SweepRow> eval_sweep(std::span<const LabeledDomain> labeled, Embedder& embedder,
                                 std::span<const double> eps_values, int min_pts = kDefaultMinPts);
/// Same, over precomputed vectors aligned with `labels`.
std::vector<SweepRow> eval_sweep(std::span<const EmbeddingVector> vectors, std::span<const bool> labels,
                                 std::span<const double> eps_values, int min_pts = kDefaultMinPts);

/// "eps\tprecision\trecall\taccuracy" header plus one line per row.
std::string sweep_tsv(std::span<const SweepRow> rows);

struct GuidelineOptions {
  std::size_t min_brand_substring = 4;
  std::size_t max_brand_label_distance = 2;
  std::size_t max_length_difference = 2;  // "less than three"
};

struct GuidelineResult {
  bool common_brand = false;     // condition 1
  bool similar_length = false;   // condition 2
  bool same_subdomain_depth = false;  // condition 3
  bool same_separators = false;  // condition 4
  bool all() const { return common_brand && similar_length && same_subdomain_depth && same_separators; }
};

/// Mechanical form of the manual labeling guidelines. Throws SetTooSmall for
/// fewer than three names.
GuidelineResult guideline_match(std::span<const DomainName> domains, std::span<const std::string> brands,
                                const GuidelineOptions& opts = {});

}  // namespace gsd
