#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "gsd/cluster.hpp"
#include "gsd/error.hpp"
#include "gsd/ingestion.hpp"
#include "oracles.hpp"

using namespace gsd;

namespace {

std::vector<EmbeddingVector> copies(const EmbeddingVector& v, int n) { return std::vector<EmbeddingVector>(n, v); }

std::vector<IngestRecord> records(std::initializer_list<const char*> names) {
  std::vector<IngestRecord> out;
  for (const char* n : names) out.push_back({parse_fqdn(n), Source::Ti, std::nullopt, std::nullopt, std::nullopt, false});
  return out;
}

std::vector<IngestRecord> fixture_records() {
  std::ifstream in(GSD_FIXTURE_DIR "/step1_ti.txt");
  REQUIRE(in);
  return load_ti(in, PublicSuffixSnapshot::bundled());
}

}  // namespace

TEST_CASE("three identical vectors form one cluster") {
  const auto v = EmbeddingVector::basis(8, 0);
  CHECK(dbscan(copies(v, 3), 0.04, 3) == std::vector<int>{0, 0, 0});
}

TEST_CASE("two identical plus one orthogonal is all noise") {
  std::vector<EmbeddingVector> pts = copies(EmbeddingVector::basis(8, 0), 2);
  pts.push_back(EmbeddingVector::basis(8, 1));
  CHECK(dbscan(pts, 0.04, 3) == std::vector<int>{kNoise, kNoise, kNoise});
}

TEST_CASE("dbscan argument checks") {
  const auto v = copies(EmbeddingVector::basis(4, 0), 3);
  CHECK_THROWS_AS(dbscan(std::vector<EmbeddingVector>{}, 0.04, 3), Error);
  CHECK_THROWS_AS(dbscan(v, 0.0, 3), Error);
  CHECK_THROWS_AS(dbscan(v, 1.0, 3), Error);
  CHECK_THROWS_AS(dbscan(v, 0.04, 1), Error);
}

TEST_CASE("border point joins the first cluster that reaches it") {
  // Two dense groups of four with a non-core point between them, reachable
  // from the edge of each group.
  auto at = [](double a) { return EmbeddingVector::from_raw({std::cos(a), std::sin(a), 0.0}); };
  const std::vector<EmbeddingVector> pts = {at(0.0),  at(0.01), at(0.02), at(0.03), at(0.25),
                                            at(0.47), at(0.48), at(0.49), at(0.50)};
  const double eps = 1.0 - std::cos(0.225);
  const std::vector<int> expect = {0, 0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(dbscan(pts, eps, 4) == expect);
  const std::vector<EmbeddingVector> rev(pts.rbegin(), pts.rend());
  CHECK(dbscan(rev, eps, 4) == expect);
}

TEST_CASE("dbscan matches the brute-force oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng() % 250, dim = 4 + rng() % 60;
    const auto vecs = oracle::clustered_vectors(rng, n, dim, 1 + rng() % 8, 0.1 + 0.4 * (rng() % 100) / 100.0);
    std::vector<std::vector<double>> raw;
    for (const auto& v : vecs) raw.push_back(oracle::values(v));
    for (double eps : {0.01, 0.04, 0.1}) {
      for (int min_pts : {2, 3, 5}) {
        const auto expect = oracle::dbscan(raw, eps, min_pts);
        CHECK(dbscan(vecs, eps, min_pts, kernels::Exec::Serial) == expect);
        CHECK(dbscan(vecs, eps, min_pts, kernels::Exec::Parallel) == expect);
      }
    }
  }
}

TEST_CASE("eps monotonicity of the non-noise set") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto vecs = oracle::clustered_vectors(rng, 200, 32, 5, 0.3);
    std::set<std::size_t> prev;
    for (int step = 1; step <= 7; ++step) {
      const auto labels = dbscan(vecs, 0.01 * step, 3);
      std::set<std::size_t> cur;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kNoise) cur.insert(i);
      }
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = std::move(cur);
    }
  }
}

TEST_CASE("core partition is invariant under permutation") {
  std::mt19937_64 rng(9);
  const auto vecs = oracle::clustered_vectors(rng, 200, 16, 4, 0.3);
  const double eps = 0.05;
  const int min_pts = 3;
  const auto neighbors = kernels::eps_neighbors_serial(EmbeddingMatrix(vecs), eps);
  auto core_partition = [&](const std::vector<int>& labels, const std::vector<std::size_t>& order) {
    std::map<int, std::set<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t orig = order[i];
      if (neighbors[orig].size() >= static_cast<std::size_t>(min_pts)) groups[labels[i]].insert(orig);
    }
    std::set<std::set<std::size_t>> out;
    for (auto& [id, g] : groups) out.insert(g);
    return out;
  };
  std::vector<std::size_t> order(vecs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto base = core_partition(dbscan(vecs, eps, min_pts), order);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<EmbeddingVector> perm;
    for (std::size_t i : order) perm.push_back(vecs[i]);
    CHECK(core_partition(dbscan(perm, eps, min_pts), order) == base);
  }
}

TEST_CASE("rule golden for the example cluster") {
  const std::vector<DomainName> members = {parse_fqdn("example000.test"), parse_fqdn("example001.test"),
                                           parse_fqdn("example002.test")};
  const auto rule = generate_rule(members);
  REQUIRE(rule);
  CHECK(to_json(*rule) == R"({"tld":".test","num":15})");
}

TEST_CASE("rule examples") {
  const std::vector<DomainName> shared = {parse_fqdn("a.example.test"), parse_fqdn("b.example.test"),
                                          parse_fqdn("c.example.test")};
  const auto r = generate_rule(shared);
  REQUIRE(r);
  CHECK(to_json(*r) == R"({"tld":".test","e2ld":"example.test","num":14})");

  const std::vector<DomainName> none = {parse_fqdn("short.com"), parse_fqdn("muchlongername.net"),
                                        parse_fqdn("mid.org")};
  CHECK_FALSE(generate_rule(none));
}

TEST_CASE("rule soundness on random clusters") {
  std::mt19937_64 rng(10);
  const char* tlds[] = {".com", ".test", ".co.jp"};
  for (int t = 0; t < 200; ++t) {
    std::vector<DomainName> members;
    const std::size_t n = 3 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
      std::string name = "n" + std::to_string(rng() % 3) + "x" + std::to_string(rng() % 100);
      if (rng() % 2) name = "sub." + name;
      members.push_back(parse_fqdn(name + tlds[rng() % 3]));
    }
    if (const auto rule = generate_rule(members)) {
      CHECK_FALSE(rule->empty());
      for (const auto& m : members) CHECK(rule->matches(m));
    }
  }
}

TEST_CASE("run_step1 on the fixture") {
  ReferenceEmbedder emb;
  const auto r = run_step1(fixture_records(), emb, 0.25, 3);
  CHECK(r.clusters.size() == 3);
  CHECK(r.reference_vectors.size() == 9);
  CHECK(r.stats.noise == 5);
  for (const auto& c : r.clusters) CHECK(c.members.size() == 3);
  REQUIRE(r.clusters.size() == 3);
  REQUIRE(r.clusters[0].rule);
  CHECK(to_json(*r.clusters[0].rule) == R"({"tld":".test","num":15})");
}

TEST_CASE("run_step1 deduplicates before clustering") {
  ReferenceEmbedder emb;
  const auto r = run_step1(records({"example000.test", "example000.test", "example000.test", "example001.test"}), emb,
                           0.04, 3);
  CHECK(r.stats.unique == 2);
  CHECK(r.clusters.empty());
}

TEST_CASE("run_step1 with nothing left after filtering") {
  ReferenceEmbedder emb;
  try {
    run_step1(records({"ab.cd.test", "123-456.test"}), emb, 0.04, 3);
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}
