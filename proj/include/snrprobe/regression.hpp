#pragma once

#include <span>
#include <string>
#include <vector>

#include "snrprobe/cka.hpp"
#include "snrprobe/embeddings.hpp"

namespace snrprobe {

struct RegressionSummary {
  std::string layer_id;
  double slope = 0.0;
  double intercept = 0.0;  // fitted value at x = 0
  double r_squared = 0.0;
  std::size_t n = 0;
  bool degenerate = false;  // y had zero variance; r_squared reported as 0
};

/// Least-squares line. Throws LengthMismatch, ConstantPredictor, TooFewRows (n < 3).
RegressionSummary ols_fit(std::span<const double> x, std::span<const double> y);

/// Average ranks, ties sharing the mean rank (1-based).
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson correlation of average ranks. Throws AllTied if either side is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct LayerTrend {
  RegressionSummary fit;
  std::string block;
  std::size_t depth_index = 0;
  bool is_skip_input = false;
  bool is_skip_output = false;
  bool is_local_slope_max = false;
};

/// CKA values of one layer, either noise-averaged (one per SNR) or per noise.
struct CkaSeries {
  std::string layer_id;
  std::vector<int> snr_db;
  std::vector<double> cka;
};

enum class FitMode {
  AveragedValues,  // fit the noise-averaged CKA curve
  AveragedFits,    // fit each noise type separately, then average coefficients
};

/// One trend per layer in manifest depth order. `per_noise` is only read in
/// AveragedFits mode. Every layer must cover `snr_grid`.
std::vector<LayerTrend> profile_layers(const std::vector<LayerInfo>& layers, const std::vector<CkaSeries>& averaged,
                                       const std::vector<std::vector<CkaSeries>>& per_noise,
                                       const std::vector<int>& snr_grid, FitMode mode = FitMode::AveragedValues);

/// Marks layers whose slope is strictly above each in-block neighbour.
void mark_local_slope_maxima(std::vector<LayerTrend>& trends);

/// Groups a CKA grid into noise-averaged series, one per layer in depth order.
std::vector<CkaSeries> series_from_points(const std::vector<LayerInfo>& layers, const std::vector<CKAPoint>& points);

}  // namespace snrprobe
