#include "gsd/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "gsd/edit_distance.hpp"
#include "gsd/embedding.hpp"
#include "gsd/error.hpp"
#include "gsd/prefilter.hpp"

namespace gsd {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t n) {
  if (n == 0) throw Error(Errc::InvalidArgument, "empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do x = next();
  while (x >= limit);
  return x % n;
}

std::int64_t SplitMix64::between(std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

bool SplitMix64::chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::Combo: return "combo";
    case Technique::Typo: return "typo";
    case Technique::DeceptiveSubdomain: return "deceptive_subdomain";
    case Technique::RandomSuffix: return "random_suffix";
  }
  return "combo";
}

Technique technique_from_string(std::string_view s) {
  for (auto t : {Technique::Combo, Technique::Typo, Technique::DeceptiveSubdomain, Technique::RandomSuffix}) {
    if (to_string(t) == s) return t;
  }
  throw Error(Errc::InvalidArgument, "unknown technique: " + std::string(s));
}

SynthTemplate synth_template_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SynthTemplate t;
    t.brand = j.at("brand").get<std::string>();
    t.technique = technique_from_string(j.at("technique").get<std::string>());
    t.tld_pool = j.at("tld_pool").get<std::vector<std::string>>();
    if (j.contains("count")) t.count = j.at("count").get<std::size_t>();
    if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("variant") && !j.at("variant").is_null()) t.variant = j.at("variant").get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("template: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::MalformedRecord, e.what());
  }
}

namespace {

constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
constexpr std::string_view kAlnum = "abcdefghijklmnopqrstuvwxyz0123456789";

/// Look-alike replacements used by substitutions half of the time.
char confusable(char c) {
  switch (c) {
    case 'o': return '0';
    case '0': return 'o';
    case 'i': return '1';
    case 'l': return '1';
    case '1': return 'l';
    case 'e': return '3';
    case 'a': return '4';
    case 's': return '5';
    case 't': return '7';
    case 'g': return '9';
    case 'b': return '6';
    case 'm': return 'n';
    case 'n': return 'm';
    case 'u': return 'v';
    case 'v': return 'u';
    default: return 0;
  }
}

char pick(std::string_view alphabet, SplitMix64& rng) { return alphabet[rng.below(alphabet.size())]; }

char substitute_char(char c, SplitMix64& rng) {
  if (const char alt = confusable(c); alt && rng.chance(0.5)) return alt;
  char r;
  do r = pick(kLetters, rng);
  while (r == c);
  return r;
}

bool valid_label_text(std::string_view s) {
  if (s.empty() || s.size() > 63 || s.front() == '-' || s.back() == '-') return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-'; });
}

std::string normalize_tld(std::string t) {
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (!t.starts_with('.')) t.insert(t.begin(), '.');
  return t;
}

std::vector<std::string> read_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && !line.starts_with('#')) out.push_back(line);
  }
  return out;
}

/// One random edit; `op` 0 insert, 1 delete, 2 substitute, 3 transpose.
void apply_edit(std::string& s, int op, SplitMix64& rng) {
  switch (op) {
    case 0: {
      const std::size_t pos = rng.below(s.size() + 1);
      // Doubling a neighbour ("amazoon") is the most common real insertion.
      const char c = pos > 0 && rng.chance(0.5) ? s[pos - 1] : pick(kLetters, rng);
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), c);
      break;
    }
    case 1:
      if (s.size() > 1) s.erase(rng.below(s.size()), 1);
      break;
    case 2: {
      const std::size_t pos = rng.below(s.size());
      s[pos] = substitute_char(s[pos], rng);
      break;
    }
    default:
      if (s.size() > 1) {
        const std::size_t pos = rng.below(s.size() - 1);
        std::swap(s[pos], s[pos + 1]);
      }
  }
}

/// Substitute or transpose at non-hyphen positions only.
void apply_layout_preserving_edit(std::string& s, SplitMix64& rng) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '-') slots.push_back(i);
  }
  if (slots.empty()) return;
  if (rng.chance(0.7)) {
    const std::size_t pos = slots[rng.below(slots.size())];
    s[pos] = substitute_char(s[pos], rng);
    return;
  }
  std::vector<std::size_t> pairs;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] != '-' && s[i + 1] != '-' && s[i] != s[i + 1]) pairs.push_back(i);
  }
  if (pairs.empty()) return;
  const std::size_t pos = pairs[rng.below(pairs.size())];
  std::swap(s[pos], s[pos + 1]);
}

std::string distinct_letters(std::size_t n, SplitMix64& rng) {
  std::string alphabet(kLetters);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(alphabet[i], alphabet[i + rng.below(alphabet.size() - i)]);
  }
  return alphabet.substr(0, n);
}

struct Combo {
  bool brand_first = true;
  std::vector<std::string> words;
};

Combo plan_combo(const SynthTemplate& tpl, SplitMix64& rng) {
  Combo plan;
  plan.brand_first = rng.chance(0.8);
  std::vector<std::string> usable;
  for (const auto& w : combo_words()) {
    if (w != tpl.brand && w.find(tpl.brand) == std::string::npos) usable.push_back(w);
  }
  // Brand-first keeps the hyphen fixed, so word lengths may vary by two;
  // word-first needs equal lengths for the hyphen to stay put.
  const std::size_t spread = plan.brand_first ? 2 : 0;
  std::vector<std::size_t> feasible;
  for (std::size_t len = 2; len <= 16; ++len) {
    const auto n = std::count_if(usable.begin(), usable.end(),
                                 [&](const std::string& w) { return w.size() >= len && w.size() <= len + spread; });
    if (static_cast<std::size_t>(n) >= tpl.count) feasible.push_back(len);
  }
  if (feasible.empty()) throw Error(Errc::ImpossibleTemplate, "word list too small for combo cluster of " + std::to_string(tpl.count));
  const std::size_t len = feasible[rng.below(feasible.size())];
  for (const auto& w : usable) {
    if (w.size() >= len && w.size() <= len + spread) plan.words.push_back(w);
  }
  for (std::size_t i = 0; i + 1 < plan.words.size(); ++i) {
    std::swap(plan.words[i], plan.words[i + rng.below(plan.words.size() - i)]);
  }
  return plan;
}

std::optional<std::string> typo_label(const std::string& brand, SplitMix64& rng) {
  const std::size_t lo = std::max<std::size_t>(brand.size() > 0 ? brand.size() - 1 : 0, 7);
  const std::size_t hi = lo + 2;
  const std::size_t need = lo > brand.size() ? lo - brand.size() : 0;
  const auto edits = std::max<std::size_t>(need, static_cast<std::size_t>(rng.between(1, 3)));
  std::string s = brand;
  for (std::size_t e = 0; e < edits; ++e) {
    apply_edit(s, e < need ? 0 : static_cast<int>(rng.below(4)), rng);
  }
  if (s.size() < lo || s.size() > hi || !valid_label_text(s)) return std::nullopt;
  const std::size_t d = damerau_levenshtein(s, brand);
  if (d < 1 || d > 3) return std::nullopt;
  return s;
}

}  // namespace

const std::vector<std::string>& combo_words() {
  static const std::vector<std::string> words = read_list(data_dir() / "wordlist.txt");
  return words;
}

std::vector<DomainName> synthesize_cluster(const SynthTemplate& tpl) {
  if (tpl.count < 3) throw Error(Errc::ImpossibleTemplate, "a cluster needs at least three names");
  if (tpl.tld_pool.empty()) throw Error(Errc::ImpossibleTemplate, "empty tld pool");
  if (!valid_label_text(tpl.brand) || tpl.brand.find('-') != std::string::npos) {
    throw Error(Errc::ImpossibleTemplate, "brand must be a single [a-z0-9] label: " + tpl.brand);
  }
  std::vector<std::string> tlds;
  for (const auto& t : tpl.tld_pool) tlds.push_back(normalize_tld(t));

  const std::string variant = tpl.variant.value_or(tpl.brand + "-co-jp");
  switch (tpl.technique) {
    case Technique::Typo:
      if (tpl.brand.size() + 3 < 7) throw Error(Errc::ImpossibleTemplate, "brand too short for a 7-character typo");
      break;
    case Technique::DeceptiveSubdomain:
      if (!valid_label_text(variant)) throw Error(Errc::ImpossibleTemplate, "invalid variant: " + variant);
      break;
    default:
      break;
  }

  SplitMix64 rng(tpl.seed ^ fnv1a64(tpl.brand + "|" + std::string(to_string(tpl.technique))));
  std::optional<Combo> combo;
  if (tpl.technique == Technique::Combo) combo = plan_combo(tpl, rng);

  std::vector<DomainName> out;
  std::unordered_set<std::string> seen;
  std::size_t next_word = 0;
  const std::size_t budget = 1000 + 500 * tpl.count;
  for (std::size_t attempt = 0; out.size() < tpl.count && attempt < budget; ++attempt) {
    const std::string& tld = tlds[rng.below(tlds.size())];
    std::string name;
    switch (tpl.technique) {
      case Technique::Combo: {
        if (next_word >= combo->words.size()) break;
        const std::string& w = combo->words[next_word++];
        name = combo->brand_first ? tpl.brand + "-" + w : w + "-" + tpl.brand;
        break;
      }
      case Technique::Typo:
        if (auto label = typo_label(tpl.brand, rng)) name = *label;
        break;
      case Technique::DeceptiveSubdomain: {
        std::string sub = variant;
        const auto edits = rng.between(1, 3);
        for (std::int64_t e = 0; e < edits; ++e) apply_layout_preserving_edit(sub, rng);
        name = sub + "." + distinct_letters(6, rng);
        break;
      }
      case Technique::RandomSuffix: {
        std::string tail;
        const auto len = rng.between(6, 8);
        for (std::int64_t i = 0; i < len; ++i) tail.push_back(pick(kAlnum, rng));
        name = tpl.brand + "-" + tail;
        break;
      }
    }
    if (name.empty()) continue;
    name += tld;
    if (seen.contains(name)) continue;
    try {
      DomainName d = parse_fqdn(name);
      if (!filter_domain(d).keep) continue;
      seen.insert(name);
      out.push_back(std::move(d));
    } catch (const Error&) {
      continue;
    }
  }
  if (out.size() < tpl.count) {
    throw Error(Errc::ImpossibleTemplate, "could not produce " + std::to_string(tpl.count) + " distinct " +
                                              std::string(to_string(tpl.technique)) + " names for " + tpl.brand);
  }
  return out;
}

std::vector<DomainName> synthesize_benign(std::size_t count, std::uint64_t seed, std::span<const std::string> extra_brands) {
  if (count == 0) throw Error(Errc::InvalidArgument, "benign count must be positive");
  static constexpr std::string_view kOnsets = "bcdfghklmnprstvwz";
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::string_view kCodas = "nrls";
  static constexpr std::array<std::string_view, 10> kTlds = {".com", ".net", ".org", ".jp", ".io",
                                                            ".co", ".info", ".de", ".co.uk", ".fr"};

  std::vector<std::string> brands = TokenVocabulary::bundled().brands();
  brands.insert(brands.end(), extra_brands.begin(), extra_brands.end());

  SplitMix64 rng(seed ^ 0x62656e69676eULL);
  auto word = [&](int lo, int hi) {
    std::string w;
    const auto syllables = rng.between(lo, hi);
    for (std::int64_t i = 0; i < syllables; ++i) {
      w.push_back(pick(kOnsets, rng));
      w.push_back(pick(kVowels, rng));
      if (rng.chance(0.3)) w.push_back(pick(kCodas, rng));
    }
    return w;
  };

  std::vector<DomainName> out;
  std::unordered_set<std::string> seen;
  const std::size_t budget = 1000 + 100 * count;
  for (std::size_t attempt = 0; out.size() < count && attempt < budget; ++attempt) {
    std::string label = word(2, 4);
    if (rng.chance(0.25)) label += "-" + word(2, 3);
    if (rng.chance(0.3)) label += std::to_string(rng.between(1, 999));
    const bool branded = std::any_of(brands.begin(), brands.end(), [&](const std::string& b) {
      return !b.empty() && label.find(b) != std::string::npos;
    });
    if (branded) continue;
    std::string name = label + std::string(kTlds[rng.below(kTlds.size())]);
    if (seen.contains(name)) continue;
    DomainName d;
    try {
      d = parse_fqdn(name);
    } catch (const Error&) {
      continue;  // e.g. the label plus TLD is itself a public suffix
    }
    if (!filter_domain(d).keep) continue;
    seen.insert(name);
    out.push_back(std::move(d));
  }
  if (out.size() < count) throw Error(Errc::InvalidArgument, "could not produce enough distinct benign names");
  return out;
}

}  // namespace gsd
