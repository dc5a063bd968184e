#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace gsd {

/// Directory holding the bundled data files (PSL snapshot, vocabularies,
/// word lists). Honors the GSD_DATA_DIR environment variable.
std::filesystem::path data_dir();

/// Immutable set of public-suffix rules in the canonical list grammar:
/// plain rules, "*." wildcard rules and "!" exception rules. Lines that
/// contain non-ASCII bytes are ignored (IDN suffixes are not supported).
class PublicSuffixSnapshot {
 public:
  static PublicSuffixSnapshot from_string(std::string_view text);
  static PublicSuffixSnapshot load(const std::filesystem::path& path);

  /// The snapshot shipped in data/public_suffix_list.dat, loaded once.
  static const PublicSuffixSnapshot& bundled();

  struct Match {
    std::size_t labels = 0;  // trailing labels that form the suffix
    bool explicit_rule = false;  // false when only the implicit "*" rule applied
  };

  /// Longest-rule match over `labels` (leftmost first). Exception rules win.
  Match match(std::span<const std::string> labels) const;

  /// Value of the "// VERSION:" comment, empty when absent.
  const std::string& version() const noexcept { return version_; }
  std::size_t rule_count() const noexcept {
    return rules_.size() + wildcards_.size() + exceptions_.size();
  }

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // stored without the "*."
  std::unordered_set<std::string> exceptions_;  // stored without the "!"
  std::string version_;
};

/// A validated, normalized fully qualified domain name.
struct DomainName {
  std::string fqdn;
  std::vector<std::string> labels;
  std::string tld;   // public suffix with leading dot, e.g. ".co.uk"
  std::string e2ld;  // registrable domain, e.g. "example.co.uk"
  std::vector<std::string> subdomain_labels;

  /// fqdn with the tld (and its leading dot) removed.
  std::string_view without_tld() const;
  /// subdomain labels joined by dots; empty when there are none.
  std::string subdomain() const;

  friend bool operator==(const DomainName& a, const DomainName& b) { return a.fqdn == b.fqdn; }
};

struct ParsedDomain {
  DomainName name;
  bool wildcard = false;  // input carried a "*." prefix
};

/// Reverses common defanging ("[.]", "(.)", "[dot]", "[:]", "hxxp").
std::string refang(std::string_view raw);

/// Trims, refangs, lowercases, strips a trailing dot and a "*." prefix,
/// validates and decomposes `raw`. Throws MalformedDomain / UnknownSuffix.
ParsedDomain parse_domain(std::string_view raw, const PublicSuffixSnapshot& psl);

/// As parse_domain, dropping the wildcard flag.
DomainName parse_fqdn(std::string_view raw, const PublicSuffixSnapshot& psl);
DomainName parse_fqdn(std::string_view raw);  // bundled snapshot

inline const std::string& effective_2ld(const DomainName& name) { return name.e2ld; }

}  // namespace gsd
