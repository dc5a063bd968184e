#pragma once

// Data-parallel hot loops. Every kernel has a serial form, kept as the
// reference the OpenMP form is tested and benchmarked against; both return
// bit-identical results because each output element is reduced by exactly
// one thread in a fixed order.

#include <cstdint>
#include <span>
#include <vector>

#include "gsd/embedding.hpp"

namespace gsd::kernels {

enum class Exec { Serial, Parallel };

/// Dot product in four fixed lanes; the summation order is part of the contract.
double dot(std::span<const double> a, std::span<const double> b);

/// cos(a_i, b_j) exactly as the kernels compute it.
inline double similarity(const EmbeddingMatrix& a, std::size_t i, const EmbeddingMatrix& b, std::size_t j) {
  return dot(a.row(i), b.row(j)) / (a.norm(i) * b.norm(j));
}

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

/// For every row, the ascending indices of rows within cosine distance `eps`
/// (1 - cos <= eps), the row itself included.
NeighborLists eps_neighbors_serial(const EmbeddingMatrix& m, double eps);
NeighborLists eps_neighbors_omp(const EmbeddingMatrix& m, double eps);
NeighborLists eps_neighbors(const EmbeddingMatrix& m, double eps, Exec exec);

struct Hit {
  std::uint32_t ref = 0;
  double sim = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// For every query row, the references with cos >= threshold, ascending by
/// reference index.
std::vector<std::vector<Hit>> threshold_scan_serial(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                                    double threshold);
std::vector<std::vector<Hit>> threshold_scan_omp(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                                 double threshold);
std::vector<std::vector<Hit>> threshold_scan(const EmbeddingMatrix& queries, const EmbeddingMatrix& refs,
                                             double threshold, Exec exec);

/// Threshold scan of a single query restricted to `candidates` (ascending).
std::vector<Hit> threshold_scan_subset(std::span<const double> query, double query_norm, const EmbeddingMatrix& refs,
                                       std::span<const std::uint32_t> candidates, double threshold);

}  // namespace gsd::kernels
