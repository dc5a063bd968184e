#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gsd/cluster.hpp"
#include "gsd/detector.hpp"

namespace gsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEmptyReference = 3;
inline constexpr int kExitMissingArtifacts = 4;

struct PipelineConfig {
  double eps = kDefaultEps;
  int min_pts = kDefaultMinPts;
  /// 1 - eps unless set.
  std::optional<double> threshold;
  int k = kDefaultK;
  std::string embedder = "reference";
  std::string psl;  // empty: bundled snapshot
  int lookback_days = 60;
  std::string clusters = "clusters.jsonl";
  std::string rules = "rules.json";
  std::string embeddings = "embeddings.jsonl";
  std::string out;  // empty: standard output
  SearchMode mode = SearchMode::Exact;
  std::uint64_t seed = 0;
  std::size_t dim = 256;

  double effective_threshold() const { return threshold.value_or(1.0 - eps); }
};

/// JSON object with any of the PipelineConfig field names. Throws
/// InvalidArgument for unknown keys or mistyped values, Io when unreadable.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Entry point; `args` excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace gsd::cli
