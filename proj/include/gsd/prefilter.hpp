#pragma once

#include <string_view>

#include "gsd/domain.hpp"

namespace gsd {

/// Why a name was excluded. Rules are evaluated in declaration order and
/// the first hit is reported.
enum class FilterReason {
  UuidSubdomain,
  Hex32Subdomain,
  Ipv4Dotted,
  Ipv4Hyphen,
  TooShort,
  AllNumeric,
  None,
};

struct FilterVerdict {
  bool keep = true;
  FilterReason reason = FilterReason::None;

  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

/// "UUID_SUBDOMAIN", "HEX32_SUBDOMAIN", ... , "NONE".
std::string_view to_string(FilterReason reason);

/// Drops names whose subdomains carry machine-generated identifiers (UUIDs,
/// 32+ hex digit runs, IPv4 addresses in dotted or hyphenated form), names
/// shorter than seven characters once the suffix is removed, and names that
/// are only digits once the suffix, dots and hyphens are removed.
FilterVerdict filter_domain(const DomainName& name);

namespace prefilter_detail {
// Exposed for unit tests.
bool contains_uuid(std::string_view label);
bool contains_hex_run(std::string_view label, std::size_t min_len);
/// Four 0-255 octets separated by `sep`, not embedded in longer digit runs.
bool contains_ipv4(std::string_view text, char sep);
}  // namespace prefilter_detail

}  // namespace gsd
