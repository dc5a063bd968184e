#include <algorithm>
#include <doctest.h>

#include <random>

#include "gsd/kernels.hpp"
#include "oracles.hpp"

using namespace gsd;
using namespace gsd::kernels;

TEST_CASE("eps_neighbors: serial and OpenMP agree and match the definition") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto vecs = oracle::clustered_vectors(rng, 150 + rng() % 150, 8 + rng() % 64, 6, 0.2);
    const EmbeddingMatrix m(vecs);
    for (double eps : {0.01, 0.05, 0.2}) {
      const auto s = eps_neighbors_serial(m, eps);
      CHECK(s == eps_neighbors_omp(m, eps));
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        std::vector<std::uint32_t> expect;
        for (std::size_t j = 0; j < vecs.size(); ++j) {
          if (1.0 - oracle::cosine(oracle::values(vecs[i]), oracle::values(vecs[j])) <= eps) {
            expect.push_back(static_cast<std::uint32_t>(j));
          }
        }
        CHECK(s[i] == expect);
      }
    }
  }
}

TEST_CASE("threshold_scan: serial, OpenMP and subset forms agree") {
  std::mt19937_64 rng(2);
  const auto all_vecs = oracle::clustered_vectors(rng, 733, 32, 10, 0.3);
  const std::vector<EmbeddingVector> refs(all_vecs.begin(), all_vecs.begin() + 400), queries(all_vecs.begin() + 400, all_vecs.end());
  const EmbeddingMatrix r(refs), q(queries);
  for (double t : {0.5, 0.9, 0.96}) {
    const auto s = threshold_scan_serial(q, r, t);
    CHECK(s == threshold_scan_omp(q, r, t));
    CHECK(std::any_of(s.begin(), s.end(), [](const auto& hits) { return !hits.empty(); }));
    std::vector<std::uint32_t> all(refs.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      CHECK(s[i] == threshold_scan_subset(q.row(i), q.norm(i), r, all, t));
      for (const auto& h : s[i]) CHECK(h.sim >= t);
    }
  }
}

TEST_CASE("similarity is the cached-norm cosine") {
  std::mt19937_64 rng(3);
  const auto v = oracle::clustered_vectors(rng, 20, 16, 0, 0.0);
  const EmbeddingMatrix m(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      CHECK(similarity(m, i, m, j) == doctest::Approx(oracle::cosine(oracle::values(v[i]), oracle::values(v[j]))).epsilon(1e-12));
    }
  }
}
