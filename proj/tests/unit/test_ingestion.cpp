#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "gsd/error.hpp"
#include "gsd/ingestion.hpp"

using namespace gsd;
using namespace std::chrono_literals;

namespace {

const PublicSuffixSnapshot& psl() { return PublicSuffixSnapshot::bundled(); }

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gsd_ingestion_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

std::vector<IngestRecord> collect_ct(const std::string& text, SeenSet& seen, IngestStats* stats = nullptr) {
  std::istringstream in(text);
  std::vector<IngestRecord> out;
  const auto s = ingest_ct(in, seen, psl(), [&](const IngestRecord& r) { out.push_back(r); });
  if (stats) *stats = s;
  return out;
}

std::vector<IngestRecord> collect_pdns(const std::string& text, SeenSet& seen) {
  std::istringstream in(text);
  std::vector<IngestRecord> out;
  ingest_pdns(in, seen, psl(), [&](const IngestRecord& r) { out.push_back(r); });
  return out;
}

std::vector<std::string> zone_diff(const std::string& today, const std::string& yesterday) {
  std::istringstream t(today), y(yesterday);
  std::vector<std::string> out;
  diff_zone(t, y, [&](const std::string& s) { out.push_back(s); });
  return out;
}

}  // namespace

TEST_CASE("rfc3339 parse and format") {
  const auto t = parse_rfc3339("2024-03-01T12:34:56Z");
  CHECK(format_rfc3339(t) == "2024-03-01T12:34:56Z");
  CHECK(parse_rfc3339("2024-03-01T21:34:56+09:00") == t);
  CHECK(parse_rfc3339("2024-03-01T12:34:56.789Z") == t);
  CHECK(parse_rfc3339("1970-01-01T00:00:00Z").time_since_epoch().count() == 0);
  for (const char* bad : {"2024-03-01", "2024-13-01T00:00:00Z", "2024-03-01T12:34:56", "garbage"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_rfc3339(bad), Error);
  }
}

TEST_CASE("ingest record JSON round trip") {
  IngestRecord r{parse_fqdn("login.bad.test"), Source::Pdns, parse_rfc3339("2024-01-02T03:04:05Z"),
                 std::vector<std::string>{"10.0.0.1"}, "paypal", false};
  const auto line = to_json_line(r);
  CHECK(line ==
        R"({"domain":"login.bad.test","source":"pdns","first_seen":"2024-01-02T03:04:05Z","ips":["10.0.0.1"],"brand":"paypal","wildcard":false})");
  const auto back = ingest_record_from_json(line, psl());
  CHECK(back.domain.fqdn == r.domain.fqdn);
  CHECK(back.source == r.source);
  CHECK(back.first_seen == r.first_seen);
  CHECK(back.ips == r.ips);
  CHECK(back.brand == r.brand);
  CHECK_THROWS_AS(ingest_record_from_json("{\"source\":\"ct\"}", psl()), Error);
  CHECK_THROWS_AS(ingest_record_from_json("not json", psl()), Error);
}

TEST_CASE("CT: renewals suppressed, first certificate wins") {
  SeenSet seen;
  const auto out = collect_ct(R"({"ts":"2024-01-01T00:00:00Z","names":["a.test"]}
{"ts":"2024-02-01T00:00:00Z","names":["a.test"]}
)",
                              seen);
  REQUIRE(out.size() == 1);
  CHECK(out[0].domain.fqdn == "a.test");
  CHECK(out[0].first_seen == parse_rfc3339("2024-01-01T00:00:00Z"));
  CHECK(out[0].source == Source::Ct);
}

TEST_CASE("CT: wildcard strip then dedup") {
  SeenSet seen;
  const auto out = collect_ct(R"({"ts":"2024-01-01T00:00:00Z","names":["a.test","*.a.test"]})", seen);
  REQUIRE(out.size() == 1);
  CHECK(out[0].domain.fqdn == "a.test");
  CHECK_FALSE(out[0].wildcard);

  SeenSet fresh;
  const auto wild = collect_ct(R"({"ts":"2024-01-01T00:00:00Z","names":["*.b.test"]})", fresh);
  REQUIRE(wild.size() == 1);
  CHECK(wild[0].domain.fqdn == "b.test");
  CHECK(wild[0].wildcard);
}

TEST_CASE("CT: malformed lines are counted, not fatal") {
  SeenSet seen;
  IngestStats stats;
  const auto out = collect_ct(R"({"ts":"2024-01-01T00:00:00Z","names":["ok-name.test","bad..name"]}
{"names":["missing-ts.test"]}
nonsense
{"ts":"2024-01-01T00:00:00Z","names":["second.test"]}
)",
                              seen, &stats);
  CHECK(out.size() == 2);
  CHECK(stats.lines == 4);
  CHECK(stats.emitted == 2);
  CHECK(stats.malformed == 3);
}

TEST_CASE("CT: replay of a 10k-record stream is deterministic") {
  std::mt19937_64 rng(11);
  std::ostringstream text;
  for (int i = 0; i < 10'000; ++i) {
    text << R"({"ts":"2024-01-01T00:00:00Z","names":["host)" << rng() % 4000 << R"(.example.test","www.site)"
         << rng() % 3000 << R"(.com"]})" << '\n';
  }
  auto run = [&] {
    SeenSet seen;
    std::vector<std::string> names;
    for (const auto& r : collect_ct(text.str(), seen)) names.push_back(r.domain.fqdn);
    return names;
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == a.size());
}

TEST_CASE("SeenSet: crash-restart after flush re-emits nothing") {
  for (auto mode : {SeenMode::Exact, SeenMode::Approximate}) {
    const auto path = temp_path(mode == SeenMode::Exact ? "seen.txt" : "seen.bloom");
    SeenSetOptions opts;
    opts.mode = mode;
    opts.expected_items = 10'000;
    std::ostringstream text;
    for (int i = 0; i < 500; ++i) text << R"({"ts":"2024-01-01T00:00:00Z","names":["n)" << i << R"(.test"]})" << '\n';
    {
      auto seen = SeenSet::open(path, opts);
      CHECK(collect_ct(text.str(), seen).size() == 500);
      seen.flush();
    }
    auto reopened = SeenSet::open(path, opts);
    CHECK(reopened.size() == 500);
    CHECK(collect_ct(text.str(), reopened).empty());
  }
}

TEST_CASE("SeenSet: exact mode TTL lets old keys back in") {
  SeenSetOptions opts;
  opts.ttl = std::chrono::seconds(24h);
  SeenSet seen(opts);
  const auto t0 = parse_rfc3339("2024-01-01T00:00:00Z");
  CHECK(seen.insert_if_absent("a.test", t0));
  CHECK_FALSE(seen.insert_if_absent("a.test", t0 + 12h));
  CHECK(seen.insert_if_absent("a.test", t0 + 48h));
}

TEST_CASE("SeenSet: bloom sizing and false-positive rate") {
  SeenSetOptions opts;
  opts.mode = SeenMode::Approximate;
  opts.expected_items = 100'000;
  SeenSet seen(opts);
  CHECK(seen.bloom_bits_per_item() >= 28.7);
  for (int i = 0; i < 100'000; ++i) REQUIRE(seen.insert_if_absent("in" + std::to_string(i) + ".test"));
  for (int i = 0; i < 100'000; i += 97) CHECK(seen.contains("in" + std::to_string(i) + ".test"));
  std::size_t false_positives = 0;
  for (int i = 0; i < 1'000'000; ++i) false_positives += seen.contains("out" + std::to_string(i) + ".test");
  // Expected about one at a rate of 1e-6.
  CHECK(false_positives <= 10);
}

TEST_CASE("SeenSet: concurrent check-and-insert admits each key once") {
  SeenSet seen;
  std::atomic<int> admitted{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&] {
      for (int i = 0; i < 5000; ++i) admitted += seen.insert_if_absent("k" + std::to_string(i) + ".test");
    });
  }
  for (auto& t : workers) t.join();
  CHECK(admitted == 5000);
  CHECK(seen.size() == 5000);
}

TEST_CASE("zone diff examples") {
  CHECK(zone_diff("a.test\nb.test\n", "a.test\n") == std::vector<std::string>{"b.test"});
  CHECK(zone_diff("a.test\nb.test\n", "a.test\nb.test\n").empty());
  CHECK(zone_diff("", "a.test\n").empty());
  CHECK_THROWS_AS(zone_diff("b.test\na.test\n", ""), Error);
  try {
    zone_diff("a.test\n", "c.test\nb.test\n");
    FAIL("expected UnsortedInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnsortedInput);
  }
}

TEST_CASE("zone diff matches a set-difference oracle on 100k lines") {
  std::mt19937_64 rng(12);
  std::set<std::string> today, yesterday;
  while (today.size() < 100'000) today.insert("d" + std::to_string(rng() % 300'000) + ".test");
  while (yesterday.size() < 100'000) yesterday.insert("d" + std::to_string(rng() % 300'000) + ".test");
  std::string t, y;
  for (const auto& s : today) t += s + "\n";
  for (const auto& s : yesterday) y += s + "\n";
  std::vector<std::string> expect;
  std::set_difference(today.begin(), today.end(), yesterday.begin(), yesterday.end(), std::back_inserter(expect));
  CHECK(zone_diff(t, y) == expect);
}

TEST_CASE("pdns: first observation wins") {
  SeenSet seen;
  const auto out = collect_pdns(R"({"ts":"2024-01-01T00:00:00Z","domain":"x.test","ip":"10.0.0.1"}
{"ts":"2024-01-02T00:00:00Z","domain":"x.test","ip":"10.0.0.2"}
)",
                                seen);
  REQUIRE(out.size() == 1);
  CHECK(out[0].first_seen == parse_rfc3339("2024-01-01T00:00:00Z"));
  CHECK(out[0].ips == std::vector<std::string>{"10.0.0.1"});
  SeenSet empty_seen;
  CHECK(collect_pdns("", empty_seen).empty());
}

TEST_CASE("pdns: emitted set is independent of partition interleaving") {
  std::mt19937_64 rng(13);
  std::vector<std::string> part[2];
  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < 300; ++i) {
      part[p].push_back(R"({"ts":"2024-01-01T00:00:0)" + std::to_string(i % 10) + R"(Z","domain":"h)" +
                        std::to_string(rng() % 200) + R"(.test","ip":"10.0.)" + std::to_string(p) + "." +
                        std::to_string(i % 250) + "\"}");
    }
  }
  std::set<std::string> base;
  for (int trial = 0; trial < 10; ++trial) {
    std::string text;
    std::size_t i0 = 0, i1 = 0;
    while (i0 < part[0].size() || i1 < part[1].size()) {
      const bool take0 = i1 == part[1].size() || (i0 < part[0].size() && rng() % 2);
      text += (take0 ? part[0][i0++] : part[1][i1++]) + "\n";
    }
    SeenSet seen;
    std::set<std::string> got;
    for (const auto& r : collect_pdns(text, seen)) got.insert(r.domain.fqdn);
    if (trial == 0) base = got;
    CHECK(got == base);
  }
}

TEST_CASE("TI: host extraction and defang reversal") {
  std::istringstream in("https://login.bad.test/path\nbad[.]test\thxxp-brand\nhxxps://user@evil-site[.]com:8443/x?y\n");
  const auto recs = load_ti(in, psl());
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].domain.fqdn == "login.bad.test");
  CHECK(recs[1].domain.fqdn == "bad.test");
  CHECK(recs[1].brand == "hxxp-brand");
  CHECK(recs[2].domain.fqdn == "evil-site.com");
  CHECK(host_of("http://a.test:80/p") == "a.test");
}

TEST_CASE("TI: duplicates keep the earliest timestamp and first position") {
  std::istringstream in("b.test\t\t2024-02-01T00:00:00Z\na.test\nb.test\tbrand\t2024-01-01T00:00:00Z\n");
  const auto recs = load_ti(in, psl());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].domain.fqdn == "b.test");
  CHECK(recs[0].first_seen == parse_rfc3339("2024-01-01T00:00:00Z"));
  CHECK(recs[0].brand == "brand");
}

TEST_CASE("TI: 1k-line mixed feed with 10% junk") {
  std::mt19937_64 rng(14);
  std::ostringstream feed;
  int junk = 0;
  for (int i = 0; i < 1000; ++i) {
    if (i % 10 == 3) {
      const char* bad[] = {"http://10.0.0.1/login", "not a domain", "bad..label.test", "-lead.test", "singlelabel"};
      feed << bad[junk++ % 5] << '\n';
      continue;
    }
    switch (rng() % 3) {
      case 0: feed << "https://site" << i << ".example.test/login\n"; break;
      case 1: feed << "site" << i << "[.]example[.]test\tbrand\n"; break;
      default: feed << "site" << i << ".example.test\n"; break;
    }
  }
  std::istringstream in(feed.str());
  IngestStats stats;
  const auto recs = load_ti(in, psl(), &stats);
  CHECK(recs.size() == 900);
  CHECK(stats.malformed == 100);
  CHECK(stats.lines == 1000);
}

TEST_CASE("source names") {
  for (auto s : {Source::Ct, Source::Zone, Source::Pdns, Source::Ti}) CHECK(source_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(source_from_string("rss"), Error);
}
