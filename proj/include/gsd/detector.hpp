#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsd/cluster.hpp"
#include "gsd/embedding.hpp"
#include "gsd/ingestion.hpp"
#include "gsd/kernels.hpp"

namespace gsd {

inline constexpr double kDefaultThreshold = 0.96;
inline constexpr int kDefaultK = 2;

enum class SearchMode {
  Exact,        // scan every reference
  AnnVerified,  // inverted lists pruned by an angular bound, positives re-checked by a full scan
  Ann,          // inverted lists, fixed number of probes
};

std::string_view to_string(SearchMode m);
SearchMode search_mode_from_string(std::string_view s);

/// Partition index over the reference set: spherical k-means centroids with
/// the angular radius of each list.
struct AnnOptions {
  std::size_t lists = 0;    // 0: round(sqrt(n))
  std::size_t probes = 8;   // Ann mode recall knob: lists scanned per query
  int iterations = 10;
  std::uint64_t seed = 0;
};

struct IndexParams {
  double threshold = kDefaultThreshold;
  int k = kDefaultK;
  SearchMode mode = SearchMode::Exact;
  AnnOptions ann;
};

struct ReferenceEntry {
  DomainName domain;
  int cluster_id = 0;
  EmbeddingVector vector;
};

enum class Verdict { Gsd, RejectedByRule, NotSimilar };
std::string_view to_string(Verdict v);

struct Match {
  std::string domain;
  double sim = 0.0;
  friend bool operator==(const Match&, const Match&) = default;
};

struct DetectionResult {
  DomainName domain;
  /// References with sim >= threshold, by descending sim then domain.
  std::vector<Match> matches;
  std::optional<int> nearest_cluster;
  Verdict verdict = Verdict::NotSimilar;
};

/// {"domain":...,"verdict":...,"nearest_cluster":...,"matches":[{"domain":...,"sim":0.123456}]}
std::string to_json_line(const DetectionResult& r);

class ReferenceIndex {
 public:
  /// Throws EmptyReferenceSet, DimensionMismatch or InvalidArgument.
  static ReferenceIndex build(std::vector<ReferenceEntry> refs, std::map<int, std::optional<MatchingRule>> rules,
                              const IndexParams& params);
  static ReferenceIndex build(const Step1Result& step1, const IndexParams& params);

  DetectionResult query(const EmbeddingVector& u, const DomainName& domain) const;
  /// Parallel over queries; results in input order.
  std::vector<DetectionResult> query_batch(std::span<const EmbeddingVector> us,
                                           std::span<const DomainName> domains) const;

  std::size_t size() const noexcept { return domains_.size(); }
  std::size_t dim() const noexcept { return refs_.dim(); }
  const IndexParams& params() const noexcept { return params_; }
  std::size_t rule_entries() const noexcept { return rules_.size(); }
  std::size_t lists() const noexcept { return centroids_.size(); }
  /// Positives whose full-scan re-check disagreed with the pruned search.
  std::uint64_t verification_mismatches() const noexcept { return mismatches_->load(); }

 private:
  std::vector<kernels::Hit> candidates_exact(const EmbeddingVector& u) const;
  std::vector<kernels::Hit> candidates_ann(const EmbeddingVector& u, bool bounded) const;
  DetectionResult decide(std::vector<kernels::Hit> hits, const DomainName& domain) const;
  void train_lists();

  IndexParams params_;
  EmbeddingMatrix refs_;
  std::vector<std::string> domains_;
  std::vector<int> owner_;
  std::map<int, std::optional<MatchingRule>> rules_;

  std::vector<EmbeddingVector> centroids_;
  std::vector<double> radius_;  // max angle centroid-to-member, radians
  std::vector<std::vector<std::uint32_t>> members_;
  std::unique_ptr<std::atomic<std::uint64_t>> mismatches_ = std::make_unique<std::atomic<std::uint64_t>>(0);
};

struct Step2Stats {
  std::size_t input = 0;
  std::size_t filtered = 0;
  std::size_t gsd = 0;
  std::size_t rejected = 0;
  std::size_t not_similar = 0;
};

/// Prefilter, embed and query each record; one result per kept record, in
/// input order.
std::vector<DetectionResult> run_step2(std::span<const IngestRecord> records, const ReferenceIndex& index,
                                       Embedder& embedder, Step2Stats* stats = nullptr);

}  // namespace gsd
