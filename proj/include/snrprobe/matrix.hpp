#pragma once

#include <Eigen/Dense>

namespace snrprobe {

/// Row-major so that one sample (one embedding) is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace snrprobe
