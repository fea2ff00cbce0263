#pragma once

#include <string>
#include <vector>

#include "snrprobe/embeddings.hpp"
#include "snrprobe/matrix.hpp"
#include "snrprobe/regression.hpp"

namespace snrprobe {

enum class EpsilonMode { Median, Fixed };
enum class IntraPoints { NoiseAveraged, PerNoise };
enum class InterLayers { FirstInBlock, AllSameDim };

struct DiffusionConfig {
  EpsilonMode epsilon_mode = EpsilonMode::Median;
  double epsilon_value = 1.0;  // used when Fixed
  int n_coords = 5;
  int time = 1;
  IntraPoints intra_points = IntraPoints::NoiseAveraged;
  InterLayers inter_layers = InterLayers::FirstInBlock;
  /// Adds each participating layer's clean centroid ("<layer>@clean") to the
  /// per-SNR inter-layer map.
  bool include_clean_reference = true;

  void validate() const;
};

struct DiffusionEmbedding {
  std::vector<std::string> point_ids;
  std::vector<double> eigenvalues;  // nontrivial, by |lambda| descending
  Matrix psi;                       // right eigenvectors, sum_i pi_i psi_j(i)^2 = 1
  Matrix coords;                    // column j = lambda_j^t psi_j
  Vector stationary;                // pi, sums to 1
  double trivial_eigenvalue = 1.0;
  double epsilon = 0.0;
  int time = 1;
};

struct DistanceMatrix {
  std::vector<std::string> labels;
  Matrix values;

  double at(const std::string& a, const std::string& b) const;
};

struct MarkovChain {
  Matrix transition;
  Vector degrees;
};

/// Squared Euclidean distances via the expanded form on column-centred data.
Matrix pairwise_sq_dists(const Matrix& x);

/// Median of the strictly positive off-diagonal entries; 0 when there are none.
double median_epsilon(const Matrix& sq_dists);

/// W(i,j) = exp(-D2(i,j) / epsilon).
Matrix gaussian_affinity(const Matrix& sq_dists, double epsilon);

/// Row normalisation P = D^-1 W, with degrees D = W 1.
MarkovChain markov_normalize(const Matrix& affinity);

/// Eigenpairs of P through the symmetric conjugate D^-1/2 W D^-1/2; the
/// trivial pair is verified and dropped.
DiffusionEmbedding diffusion_embed(const MarkovChain& chain, const DiffusionConfig& config,
                                   std::vector<std::string> point_ids = {});

/// Kernel, normalisation and embedding in one step.
DiffusionEmbedding diffusion_map(const Matrix& points, std::vector<std::string> point_ids,
                                 const DiffusionConfig& config);

/// Euclidean distances between rows of the retained coordinates.
DistanceMatrix diffusion_distances(const DiffusionEmbedding& embedding);

struct IntraLayerResult {
  std::string layer_id;
  std::vector<int> snr_db;
  std::vector<double> dc1;
  double rho = 0.0;
  double r_squared = 0.0;
  bool degenerate = false;
  DistanceMatrix distances;
};

/// Mean over `noise_types` (in order) of the per-noise centroids.
std::vector<double> noise_averaged_centroid(const CentroidSet& centroids, const std::string& layer_id, int snr_db,
                                            const std::vector<std::string>& noise_types);

/// One diffusion map per layer over the SNR grid; DC1 is oriented so that its
/// rank correlation with SNR is nonnegative.
IntraLayerResult intra_layer(const CentroidSet& centroids, const std::string& layer_id,
                             const std::vector<int>& snr_grid, const std::vector<std::string>& noise_types,
                             const DiffusionConfig& config);

struct InterLayerResult {
  int snr_db = 0;
  std::vector<std::string> layers;
  std::vector<std::string> excluded;
  DistanceMatrix distances;
};

/// One diffusion map at `snr_db` whose points are per-layer centroids.
/// Latent-block layers are excluded; any other dimension mismatch throws.
InterLayerResult inter_layer(const CentroidSet& centroids, const std::vector<LayerInfo>& layers,
                             const std::vector<std::string>& noise_types, int snr_db, const DiffusionConfig& config);

}  // namespace snrprobe
