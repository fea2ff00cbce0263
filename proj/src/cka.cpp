#include "snrprobe/cka.hpp"

#include <algorithm>
#include <cmath>

#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"
#include "snrprobe/random.hpp"

namespace snrprobe {

void CKAConfig::validate() const {
  if (bootstrap_resamples < 1) throw Error(ErrorCode::ConfigError, "bootstrap resamples must be >= 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorCode::ConfigError, "ci level must lie in (0, 1)");
}

Matrix center_columns(const Matrix& x) {
  if (x.rows() < 2) throw Error(ErrorCode::TooFewRows, "centering needs at least two rows");
  return kernels::omp::center_columns(x);
}

double linear_cka(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::RowMismatch, "CKA inputs have " + std::to_string(x.rows()) + " and " +
                                            std::to_string(y.rows()) + " rows");
  }
  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  const double n = static_cast<double>(x.rows());
  const double d1 = static_cast<double>(x.cols());
  const double d2 = static_cast<double>(y.cols());

  double cross = 0.0, self_x = 0.0, self_y = 0.0;
  if (n * (d1 + d2) <= d1 * d2 + d1 * d1 + d2 * d2) {
    // <Xc Xc^T, Yc Yc^T> = |Yc^T Xc|_F^2
    const Matrix k = kernels::omp::gram_rows(xc);
    const Matrix l = kernels::omp::gram_rows(yc);
    cross = kernels::omp::frobenius_inner(k, l);
    self_x = kernels::omp::frobenius_inner(k, k);
    self_y = kernels::omp::frobenius_inner(l, l);
  } else {
    const Matrix yx = kernels::omp::cross_columns(yc, xc);
    const Matrix xx = kernels::omp::cross_columns(xc, xc);
    const Matrix yy = kernels::omp::cross_columns(yc, yc);
    cross = kernels::omp::frobenius_inner(yx, yx);
    self_x = kernels::omp::frobenius_inner(xx, xx);
    self_y = kernels::omp::frobenius_inner(yy, yy);
  }
  if (self_x <= 0.0 || self_y <= 0.0) throw Error(ErrorCode::DegenerateInput, "centred representation is all zero");
  const double value = cross / (std::sqrt(self_x) * std::sqrt(self_y));
  return std::clamp(value, 0.0, 1.0);
}

Interval bootstrap_mean_ci(std::span<const double> values, int resamples, double level, std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "bootstrap of empty sample");
  if (values.size() == 1) return {values[0], values[0]};
  SeededStream rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += values[rng.index(values.size())];
    m = acc / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  const auto b = static_cast<double>(resamples);
  auto lo = static_cast<std::size_t>(std::floor(alpha / 2.0 * b));
  auto hi_rank = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * b));
  lo = std::min(lo, means.size() - 1);
  const std::size_t hi = std::min(std::max<std::size_t>(hi_rank, 1) - 1, means.size() - 1);
  return {means[lo], means[hi]};
}

namespace {

Matrix reshape_leading(const std::vector<double>& v, const std::vector<std::size_t>& pooled_shape) {
  if (pooled_shape.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "centroid rows need a pooled rank of at least 2");
  }
  const auto rows = static_cast<Eigen::Index>(pooled_shape[0]);
  const auto cols = static_cast<Eigen::Index>(v.size() / pooled_shape[0]);
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace

CKAPoint cka_profile(const EmbeddingSet& embeddings, const std::string& layer_id, int snr_db, const CKAConfig& config) {
  config.validate();
  const LayerInfo& layer = embeddings.layer(layer_id);
  CKAPoint point;
  point.layer_id = layer_id;
  point.snr_db = snr_db;

  const CellKey clean = CellKey::clean_ref(layer_id);
  std::vector<double> values;
  for (const std::string& noise : embeddings.noise_types()) {
    const CellKey noisy = CellKey::noisy(layer_id, noise, snr_db);
    const std::vector<std::string> utts = embeddings.utterances_in(noisy);
    if (utts.empty()) {
      throw Error(ErrorCode::MissingCell, "no embeddings for layer " + layer_id + ", noise " + noise + ", snr " +
                                              std::to_string(snr_db));
    }
    const Matrix y = embeddings.rows(noisy, utts);
    const Matrix x = embeddings.rows(clean, utts);
    double value = 0.0;
    if (config.rows == RowUnit::Utterances) {
      value = linear_cka(x, y);
      point.n_rows = static_cast<std::size_t>(x.rows());
    } else {
      std::vector<double> cx(x.cols()), cy(y.cols());
      Eigen::Map<Vector>(cx.data(), x.cols()) = x.colwise().mean().transpose();
      Eigen::Map<Vector>(cy.data(), y.cols()) = y.colwise().mean().transpose();
      const Matrix rx = reshape_leading(cx, layer.pooled_shape);
      value = linear_cka(rx, reshape_leading(cy, layer.pooled_shape));
      point.n_rows = static_cast<std::size_t>(rx.rows());
    }
    values.push_back(value);
    point.per_noise.emplace_back(noise, value);
  }
  if (values.empty()) throw Error(ErrorCode::MissingCell, "no noise types in embeddings");

  double sum = 0.0;
  for (double v : values) sum += v;
  point.cka = sum / static_cast<double>(values.size());
  const Interval ci = bootstrap_mean_ci(values, config.bootstrap_resamples, config.ci_level,
                                        derive_seed(config.rng_seed, layer_id + "|" + std::to_string(snr_db)));
  point.ci_low = std::clamp(std::min(ci.low, point.cka), 0.0, 1.0);
  point.ci_high = std::clamp(std::max(ci.high, point.cka), 0.0, 1.0);
  return point;
}

std::vector<CKAPoint> cka_grid(const EmbeddingSet& embeddings, const CKAConfig& config) {
  config.validate();
  const auto& layers = embeddings.layers();
  const auto& snrs = embeddings.snr_grid();
  const std::size_t cells = layers.size() * snrs.size();
  std::vector<CKAPoint> out(cells);
  std::vector<std::string> errors(cells);
  std::vector<ErrorCode> codes(cells, ErrorCode::StageFailure);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cells); ++c) {
    const auto k = static_cast<std::size_t>(c);
    try {
      out[k] = cka_profile(embeddings, layers[k / snrs.size()].id, snrs[k % snrs.size()], config);
    } catch (const Error& e) {
      errors[k] = e.what();
      codes[k] = e.code();
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (std::size_t k = 0; k < cells; ++k) {
    if (!errors[k].empty()) throw Error(codes[k], errors[k]);
  }
  return out;
}

}  // namespace snrprobe
