#include <algorithm>

#include <omp.h>

#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"

namespace snrprobe::kernels {

void set_num_threads(int n) { omp_set_num_threads(std::max(1, n)); }
int max_threads() { return omp_get_max_threads(); }

namespace omp {

namespace {

// Same summation order as the serial reference.
inline double row_dot(const double* a, const double* b, Eigen::Index d) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) acc += a[k] * b[k];
  return acc;
}

}  // namespace

Matrix pairwise_sq_dists(const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  std::vector<double> norms(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[static_cast<std::size_t>(i)] = row_dot(x.row(i).data(), x.row(i).data(), d);
  }
  Matrix out(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        out(i, j) = 0.0;
        continue;
      }
      const double v = norms[static_cast<std::size_t>(i)] + norms[static_cast<std::size_t>(j)] -
                       2.0 * row_dot(xi, x.row(j).data(), d);
      out(i, j) = std::max(0.0, v);
    }
  }
  return out;
}

Matrix gram_rows(const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix g(n, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = row_dot(x.row(i).data(), x.row(j).data(), d);
  }
  return g;
}

Matrix cross_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::RowMismatch, "cross_columns row counts differ");
  const Eigen::Index n = a.rows();
  Matrix c(a.cols(), b.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index p = 0; p < a.cols(); ++p) {
    double* out = c.row(p).data();
    for (Eigen::Index q = 0; q < b.cols(); ++q) out[q] = 0.0;
    // Row-major streaming over b; each out[q] still accumulates r = 0..n-1 in order.
    for (Eigen::Index r = 0; r < n; ++r) {
      const double ar = a(r, p);
      const double* br = b.row(r).data();
      for (Eigen::Index q = 0; q < b.cols(); ++q) out[q] += ar * br[q];
    }
  }
  return c;
}

Matrix center_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, c) = x(r, c) - mean;
  }
  return out;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "frobenius_inner shape mismatch");
  }
  std::vector<double> rows(static_cast<std::size_t>(a.rows()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    rows[static_cast<std::size_t>(i)] = row_dot(a.row(i).data(), b.row(i).data(), a.cols());
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

std::vector<double> mean_over_axis(std::span<const double> data, std::span<const std::size_t> shape,
                                   std::size_t axis) {
  if (axis >= shape.size()) throw Error(ErrorCode::InvalidArgument, "pooling axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  if (len == 0) throw Error(ErrorCode::EmptyAxis, "pooling axis has length 0");
  std::vector<double> out(outer * inner);
  const auto total = static_cast<std::ptrdiff_t>(outer * inner);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    const std::size_t o = static_cast<std::size_t>(k) / inner;
    const std::size_t i = static_cast<std::size_t>(k) % inner;
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) acc += data[(o * len + t) * inner + i];
    out[static_cast<std::size_t>(k)] = acc / static_cast<double>(len);
  }
  return out;
}

}  // namespace omp
}  // namespace snrprobe::kernels
