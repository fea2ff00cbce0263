#include <algorithm>

#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"

namespace snrprobe::kernels::serial {

namespace {

double row_dot(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
  return acc;
}

}  // namespace

Matrix pairwise_sq_dists(const Matrix& x) {
  const Eigen::Index n = x.rows();
  std::vector<double> norms(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) norms[static_cast<std::size_t>(i)] = row_dot(x, i, x, i);
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        d(i, j) = 0.0;
        continue;
      }
      const double v = norms[static_cast<std::size_t>(i)] + norms[static_cast<std::size_t>(j)] - 2.0 * row_dot(x, i, x, j);
      d(i, j) = std::max(0.0, v);
    }
  }
  return d;
}

Matrix gram_rows(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = row_dot(x, i, x, j);
  }
  return g;
}

Matrix cross_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::RowMismatch, "cross_columns row counts differ");
  Matrix c = Matrix::Zero(a.cols(), b.cols());
  for (Eigen::Index p = 0; p < a.cols(); ++p) {
    for (Eigen::Index q = 0; q < b.cols(); ++q) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < a.rows(); ++r) acc += a(r, p) * b(r, q);
      c(p, q) = acc;
    }
  }
  return c;
}

Matrix center_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
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
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) row += a(i, j) * b(i, j);
    total += row;
  }
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
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < len; ++t) acc += data[(o * len + t) * inner + i];
      out[o * inner + i] = acc / static_cast<double>(len);
    }
  }
  return out;
}

}  // namespace snrprobe::kernels::serial
