#pragma once

// Data-parallel inner loops. `omp` is what the library calls; `serial` is the
// reference the unit tests compare against and the benchmark races.
// Every output element is produced by one thread with a fixed summation
// order, so both variants return bit-identical results for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "snrprobe/matrix.hpp"

namespace snrprobe::kernels {

namespace serial {

/// D(i,j) = |x_i|^2 + |x_j|^2 - 2 x_i.x_j, clamped at 0, zero diagonal.
Matrix pairwise_sq_dists(const Matrix& x);
/// X X^T.
Matrix gram_rows(const Matrix& x);
/// A^T B; row counts must match.
Matrix cross_columns(const Matrix& a, const Matrix& b);
Matrix center_columns(const Matrix& x);
double frobenius_inner(const Matrix& a, const Matrix& b);
/// Mean over `axis` of a C-order array, remaining axes flattened in C order.
std::vector<double> mean_over_axis(std::span<const double> data, std::span<const std::size_t> shape,
                                   std::size_t axis);

}  // namespace serial

namespace omp {

Matrix pairwise_sq_dists(const Matrix& x);
Matrix gram_rows(const Matrix& x);
Matrix cross_columns(const Matrix& a, const Matrix& b);
Matrix center_columns(const Matrix& x);
double frobenius_inner(const Matrix& a, const Matrix& b);
std::vector<double> mean_over_axis(std::span<const double> data, std::span<const std::size_t> shape,
                                   std::size_t axis);

}  // namespace omp

/// Thread count for `omp` kernels and the per-cell stage loops.
void set_num_threads(int n);
int max_threads();

}  // namespace snrprobe::kernels
