#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snrprobe/embeddings.hpp"
#include "snrprobe/matrix.hpp"

namespace snrprobe {

/// Sample unit of the CKA matrices.
/// Utterances: rows are per-utterance embeddings of one noise type.
/// Centroids: rows are the leading pooled axis of the clean and noisy
/// centroids (e.g. frequency tokens), columns the remaining axes.
enum class RowUnit { Utterances, Centroids };

struct CKAConfig {
  int bootstrap_resamples = 1000;
  double ci_level = 0.95;
  std::uint64_t rng_seed = 0;
  RowUnit rows = RowUnit::Utterances;

  void validate() const;
};

struct CKAPoint {
  std::string layer_id;
  int snr_db = 0;
  double cka = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_rows = 0;
  std::vector<std::pair<std::string, double>> per_noise;  // sorted by noise type
};

/// Column-centred copy; needs at least two rows.
Matrix center_columns(const Matrix& x);

/// Linear CKA of two representations of the same n samples. Uses whichever of
/// the feature-space or Gram-space forms is cheaper; both are exact.
double linear_cka(const Matrix& x, const Matrix& y);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap of the mean of `values`, resampling with replacement.
/// Endpoints are order statistics of the resampled means.
Interval bootstrap_mean_ci(std::span<const double> values, int resamples, double level, std::uint64_t seed);

/// Clean-vs-noisy CKA at (layer, snr), averaged over noise types with a
/// bootstrap CI across noise types.
CKAPoint cka_profile(const EmbeddingSet& embeddings, const std::string& layer_id, int snr_db, const CKAConfig& config);

/// Every (layer, snr) cell, ordered by depth then SNR. Cells run in parallel;
/// each has its own seeded stream so results do not depend on scheduling.
std::vector<CKAPoint> cka_grid(const EmbeddingSet& embeddings, const CKAConfig& config);

}  // namespace snrprobe
