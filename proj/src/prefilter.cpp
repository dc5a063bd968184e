#include "gsd/prefilter.hpp"

#include <algorithm>
#include <array>

namespace gsd {

namespace {

constexpr std::size_t kMinLength = 7;

bool is_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Parses one octet starting at `pos`; returns its end or npos.
std::size_t read_octet(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && is_digit(s[end])) ++end;
  const std::size_t len = end - pos;
  if (len == 0 || len > 3) return std::string_view::npos;
  int value = 0;
  for (std::size_t i = pos; i < end; ++i) value = value * 10 + (s[i] - '0');
  return value <= 255 ? end : std::string_view::npos;
}

}  // namespace

namespace prefilter_detail {

bool contains_uuid(std::string_view label) {
  static constexpr std::array<std::size_t, 5> groups{8, 4, 4, 4, 12};
  constexpr std::size_t total = 36;
  if (label.size() < total) return false;
  for (std::size_t start = 0; start + total <= label.size(); ++start) {
    std::size_t pos = start;
    bool ok = true;
    for (std::size_t g = 0; g < groups.size() && ok; ++g) {
      if (g > 0) {
        if (label[pos] != '-') ok = false;
        ++pos;
      }
      for (std::size_t i = 0; i < groups[g] && ok; ++i, ++pos) ok = is_hex(label[pos]);
    }
    if (ok) return true;
  }
  return false;
}

bool contains_hex_run(std::string_view label, std::size_t min_len) {
  std::size_t run = 0;
  for (char c : label) {
    run = is_hex(c) ? run + 1 : 0;
    if (run >= min_len) return true;
  }
  return false;
}

bool contains_ipv4(std::string_view text, char sep) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (!is_digit(text[start]) || (start > 0 && is_digit(text[start - 1]))) continue;
    std::size_t pos = start;
    bool ok = true;
    for (int octet = 0; octet < 4 && ok; ++octet) {
      if (octet > 0) {
        if (pos >= text.size() || text[pos] != sep) {
          ok = false;
          break;
        }
        ++pos;
      }
      pos = read_octet(text, pos);
      ok = pos != std::string_view::npos;
    }
    if (ok && (pos == text.size() || !is_digit(text[pos]))) return true;
  }
  return false;
}

}  // namespace prefilter_detail

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::UuidSubdomain: return "UUID_SUBDOMAIN";
    case FilterReason::Hex32Subdomain: return "HEX32_SUBDOMAIN";
    case FilterReason::Ipv4Dotted: return "IPV4_DOTTED";
    case FilterReason::Ipv4Hyphen: return "IPV4_HYPHEN";
    case FilterReason::TooShort: return "TOO_SHORT";
    case FilterReason::AllNumeric: return "ALL_NUMERIC";
    case FilterReason::None: return "NONE";
  }
  return "NONE";
}

FilterVerdict filter_domain(const DomainName& name) {
  using namespace prefilter_detail;
  auto drop = [](FilterReason r) { return FilterVerdict{false, r}; };
  const auto& subs = name.subdomain_labels;

  if (std::any_of(subs.begin(), subs.end(), [](const std::string& l) { return contains_uuid(l); })) {
    return drop(FilterReason::UuidSubdomain);
  }
  if (std::any_of(subs.begin(), subs.end(), [](const std::string& l) { return contains_hex_run(l, 32); })) {
    return drop(FilterReason::Hex32Subdomain);
  }
  if (!subs.empty() && contains_ipv4(name.subdomain(), '.')) return drop(FilterReason::Ipv4Dotted);
  if (std::any_of(subs.begin(), subs.end(), [](const std::string& l) { return contains_ipv4(l, '-'); })) {
    return drop(FilterReason::Ipv4Hyphen);
  }

  const std::string_view body = name.without_tld();
  if (body.size() < kMinLength) return drop(FilterReason::TooShort);

  bool any_digit = false;
  bool only_digits = true;
  for (char c : body) {
    if (c == '.' || c == '-') continue;
    if (is_digit(c)) {
      any_digit = true;
    } else {
      only_digits = false;
      break;
    }
  }
  if (only_digits && any_digit) return drop(FilterReason::AllNumeric);
  return {};
}

}  // namespace gsd
