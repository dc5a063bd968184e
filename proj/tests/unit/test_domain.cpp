#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gsd/domain.hpp"
#include "gsd/error.hpp"
#include "oracles.hpp"

using namespace gsd;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

std::string bundled_text() {
  std::ifstream in(data_dir() / "public_suffix_list.dat");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defanged www.amazon.co[.]jp") {
  const auto d = parse_fqdn("www.amazon.co[.]jp");
  CHECK(d.fqdn == "www.amazon.co.jp");
  CHECK(d.tld == ".co.jp");
  CHECK(d.e2ld == "amazon.co.jp");
  CHECK(d.subdomain_labels == std::vector<std::string>{"www"});
}

TEST_CASE("example000.test") {
  const auto d = parse_fqdn("example000.test");
  CHECK(d.tld == ".test");
  CHECK(d.e2ld == "example000.test");
  CHECK(d.subdomain_labels.empty());
}

TEST_CASE("normalization: case and trailing dot") {
  CHECK(parse_fqdn("EXAMPLE.COM.").fqdn == "example.com");
  CHECK(parse_fqdn("  Example.Com  ").fqdn == "example.com");
}

TEST_CASE("effective_2ld examples") {
  CHECK(effective_2ld(parse_fqdn("mail.example.co.uk")) == "example.co.uk");
  CHECK(effective_2ld(parse_fqdn("example.com")) == "example.com");
  CHECK(effective_2ld(parse_fqdn("a.b.c.example.org")) == "example.org");
}

TEST_CASE("refang") {
  CHECK(refang("bad[.]test") == "bad.test");
  CHECK(refang("bad(.)test") == "bad.test");
  CHECK(refang("bad[dot]test") == "bad.test");
  CHECK(refang("hxxps[:]//x.test") == "https://x.test");
}

TEST_CASE("wildcard prefix is stripped and flagged") {
  const auto p = parse_domain("*.a.test", PublicSuffixSnapshot::bundled());
  CHECK(p.wildcard);
  CHECK(p.name.fqdn == "a.test");
  CHECK_FALSE(parse_domain("a.test", PublicSuffixSnapshot::bundled()).wildcard);
}

TEST_CASE("malformed inputs") {
  CHECK(error_of([] { parse_fqdn(""); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("   "); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("a..test"); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("-a.test"); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("a-.test"); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("a_b.test"); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn("b\xc3\xbc.test"); }) == Errc::MalformedDomain);
  CHECK(error_of([] { parse_fqdn(std::string(64, 'a') + ".test"); }) == Errc::MalformedDomain);
  CHECK_NOTHROW(parse_fqdn(std::string(63, 'a') + ".test"));
  std::string long_name;
  for (int i = 0; i < 5; ++i) long_name += std::string(50, 'a') + ".";
  long_name += "com";
  CHECK(long_name.size() > 253);
  CHECK(error_of([&] { parse_fqdn(long_name); }) == Errc::MalformedDomain);
}

TEST_CASE("unknown suffix") {
  CHECK(error_of([] { parse_fqdn("localhost"); }) == Errc::UnknownSuffix);
  CHECK(error_of([] { parse_fqdn("co.uk"); }) == Errc::UnknownSuffix);
  // A multi-label name under an unlisted TLD falls back to the implicit "*" rule.
  CHECK(parse_fqdn("foo.notarealtld").tld == ".notarealtld");
}

TEST_CASE("snapshot grammar: wildcard and exception rules") {
  const auto psl = PublicSuffixSnapshot::from_string(
      "// VERSION: test-1\n"
      "com\n"
      "*.ck\n"
      "!www.ck\n"
      "co.uk\n"
      "uk\n");
  CHECK(psl.version() == "test-1");
  CHECK(parse_fqdn("foo.bar.ck", psl).e2ld == "foo.bar.ck");
  CHECK(parse_fqdn("foo.bar.ck", psl).tld == ".bar.ck");
  CHECK(parse_fqdn("www.ck", psl).e2ld == "www.ck");
  CHECK(parse_fqdn("www.ck", psl).tld == ".ck");
  CHECK(parse_fqdn("a.b.co.uk", psl).e2ld == "b.co.uk");
}

TEST_CASE("bundled snapshot agrees with an independent lookup") {
  const oracle::Psl naive(bundled_text());
  const char* names[] = {"a.b.c.example.org", "www.amazon.co.jp", "mail.example.co.uk", "x.y.github.io",
                         "foo.bar.kawasaki.jp", "city.kawasaki.jp", "a.s3.amazonaws.com", "q.blogspot.com",
                         "deep.sub.example.com.au", "login.example.icu", "x.example.xyz", "a.b.c.d.e.f.de"};
  for (const char* n : names) {
    CAPTURE(n);
    const auto d = parse_fqdn(n);
    const std::size_t k = naive.suffix_labels(n);
    std::string expect_tld;
    std::vector<std::string> labels = d.labels;
    for (std::size_t i = labels.size() - k; i < labels.size(); ++i) expect_tld += "." + labels[i];
    CHECK(d.tld == expect_tld);
    CHECK(d.e2ld == labels[labels.size() - k - 1] + expect_tld);
  }
}

TEST_CASE("properties over a generated corpus") {
  std::mt19937_64 rng(11);
  const char* tlds[] = {".com", ".co.uk", ".jp", ".co.jp", ".test", ".icu", ".github.io", ".com.au"};
  auto label = [&] {
    std::string s;
    const std::size_t len = 1 + rng() % 12;
    for (std::size_t i = 0; i < len; ++i) s.push_back("abcdefghijklmnopqrstuvwxyz0123456789"[rng() % 36]);
    return s;
  };
  for (int i = 0; i < 2000; ++i) {
    std::string name = label();
    const std::size_t subs = rng() % 4;
    for (std::size_t s = 0; s < subs; ++s) name = label() + "." + name;
    name += tlds[rng() % std::size(tlds)];
    const auto d = parse_fqdn(name);
    CAPTURE(name);
    // join(labels) == fqdn
    std::string joined;
    for (const auto& l : d.labels) joined += (joined.empty() ? "" : ".") + l;
    CHECK(joined == d.fqdn);
    CHECK(d.fqdn.ends_with(d.tld));
    CHECK(d.e2ld.ends_with(d.tld));
    CHECK(d.e2ld.find('.') == d.e2ld.size() - d.tld.size());
    // reconstruction from parts
    const std::string rebuilt = d.subdomain_labels.empty() ? d.e2ld : d.subdomain() + "." + d.e2ld;
    CHECK(rebuilt == d.fqdn);
    // idempotence
    CHECK(parse_fqdn(d.fqdn).fqdn == d.fqdn);
    // e2ld invariant under prepending labels
    CHECK(parse_fqdn("extra." + d.fqdn).e2ld == d.e2ld);
  }
}
