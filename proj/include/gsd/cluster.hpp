#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsd/domain.hpp"
#include "gsd/embedding.hpp"
#include "gsd/ingestion.hpp"
#include "gsd/kernels.hpp"

namespace gsd {

inline constexpr int kNoise = -1;
inline constexpr double kDefaultEps = 0.04;
inline constexpr int kDefaultMinPts = 3;

/// Density clustering under cosine distance (1 - cos). A point is core when
/// at least `min_pts` points, itself included, lie within `eps`. Points are
/// visited in input order and clusters grow breadth-first, so a border point
/// joins the first cluster that reaches it. Returns one label per point:
/// a cluster id numbered from 0 in discovery order, or kNoise.
std::vector<int> dbscan(const EmbeddingMatrix& points, double eps, int min_pts,
                        kernels::Exec exec = kernels::Exec::Parallel);
std::vector<int> dbscan(std::span<const EmbeddingVector> points, double eps, int min_pts,
                        kernels::Exec exec = kernels::Exec::Parallel);

/// Constraints shared by every member of a cluster.
struct MatchingRule {
  std::optional<std::string> tld;
  std::optional<std::string> e2ld;
  std::optional<std::size_t> num;  // fqdn length, dots included

  bool matches(const DomainName& d) const;
  bool empty() const { return !tld && !e2ld && !num; }
  friend bool operator==(const MatchingRule&, const MatchingRule&) = default;
};

/// {"tld":...,"e2ld":...,"num":...}, keys in that order, absent keys omitted.
std::string to_json(const MatchingRule& rule);

struct Cluster {
  int cluster_id = 0;
  std::vector<DomainName> members;
  std::optional<MatchingRule> rule;
};

std::optional<MatchingRule> generate_rule(std::span<const DomainName> members);
inline std::optional<MatchingRule> generate_rule(const Cluster& c) { return generate_rule(c.members); }

struct Step1Stats {
  std::size_t input = 0;
  std::size_t filtered = 0;
  std::size_t unique = 0;
  std::size_t clustered = 0;
  std::size_t noise = 0;
};

struct Step1Result {
  std::vector<Cluster> clusters;
  /// Clustered members, cluster by cluster, aligned with reference_vectors.
  std::vector<DomainName> reference_domains;
  std::vector<int> reference_clusters;
  std::vector<EmbeddingVector> reference_vectors;
  Step1Stats stats;
};

/// Prefilter, deduplicate (first occurrence keeps its position), embed,
/// cluster and derive rules. Noise points are dropped. Throws EmptyInput when
/// nothing survives filtering.
Step1Result run_step1(std::span<const IngestRecord> ti, Embedder& embedder, double eps = kDefaultEps,
                      int min_pts = kDefaultMinPts);

}  // namespace gsd
