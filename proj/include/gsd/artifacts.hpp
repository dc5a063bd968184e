#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gsd/cluster.hpp"
#include "gsd/detector.hpp"

namespace gsd {

/// Clusters file: one {"cluster_id":N,"members":[...]} line per cluster.
void write_clusters(const std::filesystem::path& path, std::span<const Cluster> clusters);
std::vector<Cluster> read_clusters(const std::filesystem::path& path,
                                   const PublicSuffixSnapshot& psl = PublicSuffixSnapshot::bundled());

/// Rules file: a JSON array of {"cluster_id":N,"tld":...,"e2ld":...,"num":...};
/// a cluster without a rule appears with its id only.
void write_rules(const std::filesystem::path& path, std::span<const Cluster> clusters);
std::map<int, std::optional<MatchingRule>> read_rules(const std::filesystem::path& path);

/// Writes the three Step-1 artifacts.
void write_step1(const Step1Result& r, const std::filesystem::path& clusters, const std::filesystem::path& rules,
                 const std::filesystem::path& embeddings, std::string_view model, std::size_t dim);

/// Joins the clusters file with the reference embeddings. Throws
/// MissingEmbedding when a member has no vector.
std::vector<ReferenceEntry> load_reference_entries(const std::filesystem::path& clusters,
                                                   const std::filesystem::path& embeddings,
                                                   const PublicSuffixSnapshot& psl = PublicSuffixSnapshot::bundled());

}  // namespace gsd
