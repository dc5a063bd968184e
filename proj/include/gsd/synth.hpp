#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsd/domain.hpp"

namespace gsd {

/// SplitMix64 (Steele, Lea, Flood 2014): state += 0x9e3779b97f4a7c15, then the
/// variant-13 finalizer. Bounded draws use rejection sampling on the top of
/// the 64-bit range, so every platform yields the same sequence.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  bool chance(double p);

 private:
  std::uint64_t state_;
};

enum class Technique { Combo, Typo, DeceptiveSubdomain, RandomSuffix };
std::string_view to_string(Technique t);
Technique technique_from_string(std::string_view s);

struct SynthTemplate {
  std::string brand;
  Technique technique = Technique::Combo;
  std::vector<std::string> tld_pool;
  std::size_t count = 3;
  std::uint64_t seed = 0;
  /// Deceptive-subdomain base string; defaults to "<brand>-co-jp".
  std::optional<std::string> variant;
};

SynthTemplate synth_template_from_json(std::string_view line);

/// Generates `count` distinct names following the template's technique.
/// Every name passes the prefilter, and within one cluster the lengths differ
/// by at most two and the dot/hyphen layout is identical. Throws
/// ImpossibleTemplate when the constraints cannot be met.
///
///  - Combo: "<brand>-<word>" (or "<word>-<brand>") from the bundled word list.
///  - Typo: 1-3 insert/delete/substitute/transpose edits of the brand.
///  - DeceptiveSubdomain: "<variant with 1-3 edits>.<6 distinct letters><tld>".
///  - RandomSuffix: "<brand>-<6-8 random [a-z0-9]>".
std::vector<DomainName> synthesize_cluster(const SynthTemplate& tpl);

/// Pronounceable word(s), optional number, common TLD. Never contains a
/// bundled brand (or any of `extra_brands`) as a substring.
std::vector<DomainName> synthesize_benign(std::size_t count, std::uint64_t seed,
                                          std::span<const std::string> extra_brands = {});

/// Bundled combo word list (data/wordlist.txt).
const std::vector<std::string>& combo_words();

}  // namespace gsd
