#include "gsd/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gsd/error.hpp"

#ifndef GSD_DEFAULT_DATA_DIR
#define GSD_DEFAULT_DATA_DIR "data"
#endif

namespace gsd {

namespace {

constexpr std::size_t kMaxLabel = 63;
constexpr std::size_t kMaxName = 253;

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

bool label_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

}  // namespace

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("GSD_DATA_DIR"); env && *env) return env;
  return GSD_DEFAULT_DATA_DIR;
}

PublicSuffixSnapshot PublicSuffixSnapshot::from_string(std::string_view text) {
  PublicSuffixSnapshot psl;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view rule = trim(line);
    if (rule.starts_with("//")) {
      constexpr std::string_view tag = "// VERSION:";
      if (rule.starts_with(tag)) psl.version_ = std::string(trim(rule.substr(tag.size())));
      continue;
    }
    // The list grammar ends a rule at the first whitespace.
    rule = rule.substr(0, rule.find_first_of(" \t"));
    if (rule.empty()) continue;
    if (std::any_of(rule.begin(), rule.end(), [](char c) { return static_cast<unsigned char>(c) > 0x7f; })) {
      continue;
    }
    std::string r(rule);
    std::transform(r.begin(), r.end(), r.begin(), [](unsigned char c) { return std::tolower(c); });
    if (r.starts_with('!')) {
      psl.exceptions_.insert(r.substr(1));
    } else if (r.starts_with("*.")) {
      psl.wildcards_.insert(r.substr(2));
    } else {
      psl.rules_.insert(std::move(r));
    }
  }
  return psl;
}

PublicSuffixSnapshot PublicSuffixSnapshot::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read public suffix list " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto psl = from_string(buf.str());
  if (psl.rule_count() == 0) throw Error(Errc::Io, "public suffix list is empty: " + path.string());
  return psl;
}

const PublicSuffixSnapshot& PublicSuffixSnapshot::bundled() {
  static const PublicSuffixSnapshot psl = load(data_dir() / "public_suffix_list.dat");
  return psl;
}

PublicSuffixSnapshot::Match PublicSuffixSnapshot::match(std::span<const std::string> labels) const {
  const std::size_t n = labels.size();
  Match best{n ? std::size_t{1} : std::size_t{0}, false};
  bool have_explicit = false;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string candidate = join(labels.subspan(i), '.');
    const std::size_t len = n - i;
    if (exceptions_.contains(candidate)) {
      // The exception's parent is the suffix, regardless of longer rules.
      return Match{len - 1, true};
    }
    if (have_explicit) continue;
    if (rules_.contains(candidate)) {
      best = Match{len, true};
      have_explicit = true;
    } else if (len >= 2 && wildcards_.contains(join(labels.subspan(i + 1), '.'))) {
      best = Match{len, true};
      have_explicit = true;
    }
  }
  return best;
}

std::string_view DomainName::without_tld() const {
  return std::string_view(fqdn).substr(0, fqdn.size() - tld.size());
}

std::string DomainName::subdomain() const { return join(subdomain_labels, '.'); }

std::string refang(std::string_view raw) {
  std::string s(raw);
  replace_all(s, "[.]", ".");
  replace_all(s, "(.)", ".");
  replace_all(s, "[dot]", ".");
  replace_all(s, "[:]", ":");
  replace_all(s, "hxxp", "http");
  replace_all(s, "HXXP", "http");
  return s;
}

ParsedDomain parse_domain(std::string_view raw, const PublicSuffixSnapshot& psl) {
  std::string s = refang(trim(raw));
  if (s.empty()) throw Error(Errc::MalformedDomain, "empty name");
  for (char& c : s) {
    if (static_cast<unsigned char>(c) > 0x7f) throw Error(Errc::MalformedDomain, "non-ASCII input: " + s);
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (s.ends_with('.')) s.pop_back();
  ParsedDomain out;
  if (s.starts_with("*.")) {
    out.wildcard = true;
    s.erase(0, 2);
  }
  if (s.empty()) throw Error(Errc::MalformedDomain, "empty name");
  if (s.size() > kMaxName) throw Error(Errc::MalformedDomain, "name longer than 253: " + s);

  DomainName& d = out.name;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = s.find('.', start);
    std::string_view label = std::string_view(s).substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (label.empty()) throw Error(Errc::MalformedDomain, "empty label in " + s);
    if (label.size() > kMaxLabel) throw Error(Errc::MalformedDomain, "label longer than 63 in " + s);
    if (!std::all_of(label.begin(), label.end(), label_char)) {
      throw Error(Errc::MalformedDomain, "invalid character in " + s);
    }
    if (label.front() == '-' || label.back() == '-') {
      throw Error(Errc::MalformedDomain, "label starts or ends with hyphen in " + s);
    }
    d.labels.emplace_back(label);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  const auto m = psl.match(d.labels);
  if (!m.explicit_rule && d.labels.size() == 1) throw Error(Errc::UnknownSuffix, "no suffix rule for " + s);
  if (m.labels >= d.labels.size()) throw Error(Errc::UnknownSuffix, "no registrable label in " + s);

  const std::size_t first_suffix = d.labels.size() - m.labels;
  d.tld = "." + join(std::span(d.labels).subspan(first_suffix), '.');
  d.e2ld = join(std::span(d.labels).subspan(first_suffix - 1), '.');
  d.subdomain_labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(first_suffix - 1));
  d.fqdn = std::move(s);
  return out;
}

DomainName parse_fqdn(std::string_view raw, const PublicSuffixSnapshot& psl) {
  return parse_domain(raw, psl).name;
}

DomainName parse_fqdn(std::string_view raw) { return parse_fqdn(raw, PublicSuffixSnapshot::bundled()); }

}  // namespace gsd
