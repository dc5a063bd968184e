#include "gsd/kernels.hpp"

#include <algorithm>

#include "gsd/error.hpp"

namespace gsd::kernels {

namespace {

// Queries processed together so each reference row is loaded once per tile.
constexpr std::size_t kQueryTile = 16;

void check_dims(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.rows() && b.rows() && a.dim() != b.dim()) {
    throw Error(Errc::DimensionMismatch, std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

void neighbors_of_row(const EmbeddingMatrix& m, std::size_t i, double eps, std::vector<std::uint32_t>& out) {
  out.clear();
  for (std::size_t j = 0; j < m.rows(); ++j) {
    if (j == i || 1.0 - similarity(m, i, m, j) <= eps) out.push_back(static_cast<std::uint32_t>(j));
  }
}

void scan_tile(const EmbeddingMatrix& queries, std::size_t q0, std::size_t q1, const EmbeddingMatrix& refs,
               double threshold, std::vector<std::vector<Hit>>& out) {
  for (std::size_t r = 0; r < refs.rows(); ++r) {
    for (std::size_t q = q0; q < q1; ++q) {
      const double sim = similarity(queries, q, refs, r);
      if (sim >= threshold) out[q].push_back({static_cast<std::uint32_t>(r), sim});
    }
  }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  // Four interleaved partial sums, combined as (s0 + s1) + (s2 + s3).
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size(), body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) s[l] += a[i + l] * b[i + l];
  }
  for (std::size_t i = body; i < n; ++i) s[i % 4] += a[i] * b[i];
  return (s[0] + s[1]) + (s[2] + s[3]);
}

NeighborLists eps_neighbors_serial(const EmbeddingMatrix& m, double eps) {
  NeighborLists out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) neighbors_of_row(m, i, eps, out[i]);
  return out;
}

NeighborLists eps_neighbors_omp(const EmbeddingMatrix& m, double eps) {
  NeighborLists out(m.rows());
  const auto n = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) neighbors_of_row(m, static_cast<std::size_t>(i), eps, out[static_cast<std::size_t>(i)]);
  return out;
}

NeighborLists eps_neighbors(const EmbeddingMatrix& m, double eps, Exec exec) {
  return exec == Exec::Parallel ? eps_neighbors_omp(m, eps) : eps_neighbors_serial(m, eps);
}

std::vector<std::vector<Hit>> threshold_scan_serial(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                                    double threshold) {
  check_dims(queries, refs);
  std::vector<std::vector<Hit>> out(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    for (std::size_t r = 0; r < refs.rows(); ++r) {
      const double sim = similarity(queries, q, refs, r);
      if (sim >= threshold) out[q].push_back({static_cast<std::uint32_t>(r), sim});
    }
  }
  return out;
}

std::vector<std::vector<Hit>> threshold_scan_omp(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                                 double threshold) {
  check_dims(queries, refs);
  std::vector<std::vector<Hit>> out(queries.rows());
  const auto tiles = static_cast<std::ptrdiff_t>((queries.rows() + kQueryTile - 1) / kQueryTile);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const std::size_t q0 = static_cast<std::size_t>(t) * kQueryTile;
    const std::size_t q1 = std::min(queries.rows(), q0 + kQueryTile);
    scan_tile(queries, q0, q1, refs, threshold, out);
  }
  return out;
}

std::vector<std::vector<Hit>> threshold_scan(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                             double threshold, Exec exec) {
  return exec == Exec::Parallel ? threshold_scan_omp(queries, refs, threshold)
                                : threshold_scan_serial(queries, refs, threshold);
}

std::vector<Hit> threshold_scan_subset(std::span<const double> query, double query_norm, const EmbeddingMatrix& refs,
                                       std::span<const std::uint32_t> candidates, double threshold) {
  std::vector<Hit> out;
  for (std::uint32_t r : candidates) {
    const double sim = dot(query, refs.row(r)) / (query_norm * refs.norm(r));
    if (sim >= threshold) out.push_back({r, sim});
  }
  return out;
}

}  // namespace gsd::kernels
