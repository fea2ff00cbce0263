#include "snrprobe/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"

namespace snrprobe {
namespace {

constexpr double kTrivialTolerance = 1e-8;
constexpr double kDegenerateCoordinate = 1e-8;

}  // namespace

void DiffusionConfig::validate() const {
  if (epsilon_mode == EpsilonMode::Fixed && !(epsilon_value > 0.0)) {
    throw Error(ErrorCode::BadEpsilon, "fixed epsilon must be positive");
  }
  if (n_coords < 1) throw Error(ErrorCode::ConfigError, "at least one diffusion coordinate is required");
  if (time < 1) throw Error(ErrorCode::ConfigError, "diffusion time must be >= 1");
}

double DistanceMatrix::at(const std::string& a, const std::string& b) const {
  auto ia = std::find(labels.begin(), labels.end(), a);
  auto ib = std::find(labels.begin(), labels.end(), b);
  if (ia == labels.end() || ib == labels.end()) throw Error(ErrorCode::MissingCell, "no distance entry " + a + " / " + b);
  return values(ia - labels.begin(), ib - labels.begin());
}

Matrix pairwise_sq_dists(const Matrix& x) {
  if (x.rows() < 2) throw Error(ErrorCode::TooFewRows, "distances need at least two points");
  return kernels::omp::pairwise_sq_dists(kernels::omp::center_columns(x));
}

double median_epsilon(const Matrix& sq_dists) {
  std::vector<double> positive;
  for (Eigen::Index i = 0; i < sq_dists.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < sq_dists.cols(); ++j) {
      if (sq_dists(i, j) > 0.0) positive.push_back(sq_dists(i, j));
    }
  }
  if (positive.empty()) return 0.0;
  const std::size_t mid = positive.size() / 2;
  std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid), positive.end());
  const double upper = positive[mid];
  if (positive.size() % 2 == 1) return upper;
  const double lower = *std::max_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Matrix gaussian_affinity(const Matrix& sq_dists, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::BadEpsilon, "epsilon must be positive and finite");
  Matrix w(sq_dists.rows(), sq_dists.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = i == j ? 1.0 : std::exp(-sq_dists(i, j) / epsilon);
  }
  return w;
}

MarkovChain markov_normalize(const Matrix& affinity) {
  MarkovChain chain;
  chain.degrees = affinity.rowwise().sum();
  chain.transition.resize(affinity.rows(), affinity.cols());
  for (Eigen::Index i = 0; i < affinity.rows(); ++i) {
    if (!(chain.degrees(i) > 0.0)) throw Error(ErrorCode::ZeroRow, "point " + std::to_string(i) + " is isolated");
    chain.transition.row(i) = affinity.row(i) / chain.degrees(i);
  }
  return chain;
}

DiffusionEmbedding diffusion_embed(const MarkovChain& chain, const DiffusionConfig& config,
                                   std::vector<std::string> point_ids) {
  config.validate();
  const Eigen::Index n = chain.transition.rows();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "a diffusion map needs at least two points");
  if (point_ids.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) point_ids.push_back(std::to_string(i));
  }

  const Vector sqrt_deg = chain.degrees.array().sqrt();
  // S = D^1/2 P D^-1/2 = D^-1/2 W D^-1/2
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = sqrt_deg(i) * chain.transition(i, j) / sqrt_deg(j);
  }
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() == Eigen::NoConvergence) throw Error(ErrorCode::NonConvergence, "eigensolver did not converge");
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "eigendecomposition failed");
  const Eigen::VectorXd& lambda = solver.eigenvalues();

  const double total_degree = chain.degrees.sum();
  Matrix psi_all(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      psi_all(i, j) = std::sqrt(total_degree) * solver.eigenvectors()(i, j) / sqrt_deg(i);
    }
  }

  Eigen::Index trivial = 0;
  lambda.maxCoeff(&trivial);
  const double psi0 = psi_all(0, trivial);
  double spread = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) spread = std::max(spread, std::abs(psi_all(i, trivial) - psi0));
  if (std::abs(lambda(trivial) - 1.0) > kTrivialTolerance || spread > kTrivialTolerance) {
    throw Error(ErrorCode::EigenFailure, "leading eigenpair is not the trivial (1, constant) pair");
  }

  std::vector<Eigen::Index> order;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != trivial) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(lambda(a)), mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    return lambda(a) > lambda(b);
  });
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(config.n_coords), order.size());

  DiffusionEmbedding emb;
  emb.point_ids = std::move(point_ids);
  emb.trivial_eigenvalue = lambda(trivial);
  emb.time = config.time;
  emb.stationary = chain.degrees / total_degree;
  emb.psi.resize(n, static_cast<Eigen::Index>(k));
  emb.coords.resize(n, static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::Index src = order[c];
    const auto col = static_cast<Eigen::Index>(c);
    Eigen::Index peak = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (std::abs(psi_all(i, src)) > std::abs(psi_all(peak, src))) peak = i;
    }
    const double sign = psi_all(peak, src) < 0.0 ? -1.0 : 1.0;
    const double weight = std::pow(lambda(src), config.time);
    emb.eigenvalues.push_back(lambda(src));
    for (Eigen::Index i = 0; i < n; ++i) {
      emb.psi(i, col) = sign * psi_all(i, src);
      emb.coords(i, col) = weight * emb.psi(i, col);
    }
  }
  return emb;
}

DiffusionEmbedding diffusion_map(const Matrix& points, std::vector<std::string> point_ids,
                                 const DiffusionConfig& config) {
  config.validate();
  const Matrix d2 = pairwise_sq_dists(points);
  double epsilon = config.epsilon_value;
  if (config.epsilon_mode == EpsilonMode::Median) {
    epsilon = median_epsilon(d2);
    if (epsilon == 0.0) epsilon = 1.0;  // all points coincide; any bandwidth gives W = 1
  }
  DiffusionEmbedding emb = diffusion_embed(markov_normalize(gaussian_affinity(d2, epsilon)), config, std::move(point_ids));
  emb.epsilon = epsilon;
  return emb;
}

DistanceMatrix diffusion_distances(const DiffusionEmbedding& embedding) {
  const Eigen::Index n = embedding.coords.rows();
  DistanceMatrix out;
  out.labels = embedding.point_ids;
  out.values = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (embedding.coords.row(i) - embedding.coords.row(j)).norm();
      out.values(i, j) = d;
      out.values(j, i) = d;
    }
  }
  return out;
}

std::vector<double> noise_averaged_centroid(const CentroidSet& centroids, const std::string& layer_id, int snr_db,
                                            const std::vector<std::string>& noise_types) {
  std::vector<const std::vector<double>*> members;
  for (const std::string& noise : noise_types) members.push_back(&centroids.at(CellKey::noisy(layer_id, noise, snr_db)));
  return mean_of(members);
}

namespace {

Matrix stack_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw Error(ErrorCode::DimensionMismatch, "points differ in dimension");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

IntraLayerResult intra_from_points(const std::string& layer_id, const std::vector<int>& snr_grid,
                                   const std::vector<std::vector<double>>& points, const DiffusionConfig& config) {
  std::vector<std::string> labels;
  for (int s : snr_grid) labels.push_back(std::to_string(s));
  const DiffusionEmbedding emb = diffusion_map(stack_rows(points), labels, config);

  IntraLayerResult r;
  r.layer_id = layer_id;
  r.snr_db = snr_grid;
  r.dc1.resize(snr_grid.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    r.dc1[i] = emb.coords(static_cast<Eigen::Index>(i), 0);
    peak = std::max(peak, std::abs(r.dc1[i]));
  }
  r.distances = diffusion_distances(emb);
  if (peak < kDegenerateCoordinate) {
    r.degenerate = true;
    std::fill(r.dc1.begin(), r.dc1.end(), 0.0);
    return r;
  }
  const std::vector<double> x(snr_grid.begin(), snr_grid.end());
  r.rho = spearman_rho(r.dc1, x);
  if (r.rho < 0.0) {
    for (double& v : r.dc1) v = -v;
    r.rho = -r.rho;
  }
  r.r_squared = ols_fit(x, r.dc1).r_squared;
  return r;
}

}  // namespace

IntraLayerResult intra_layer(const CentroidSet& centroids, const std::string& layer_id,
                             const std::vector<int>& snr_grid, const std::vector<std::string>& noise_types,
                             const DiffusionConfig& config) {
  config.validate();
  if (snr_grid.size() < 3) throw Error(ErrorCode::IncompleteGrid, "intra-layer analysis needs at least 3 SNR points");
  if (noise_types.empty()) throw Error(ErrorCode::IncompleteGrid, "no noise types");
  auto gather = [&](const std::vector<std::string>& noises) {
    std::vector<std::vector<double>> points;
    for (int snr : snr_grid) {
      try {
        points.push_back(noise_averaged_centroid(centroids, layer_id, snr, noises));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::MissingCell) throw Error(ErrorCode::IncompleteGrid, e.what());
        throw;
      }
    }
    return points;
  };

  if (config.intra_points == IntraPoints::NoiseAveraged) {
    return intra_from_points(layer_id, snr_grid, gather(noise_types), config);
  }

  std::vector<IntraLayerResult> parts;
  for (const std::string& noise : noise_types) parts.push_back(intra_from_points(layer_id, snr_grid, gather({noise}), config));
  IntraLayerResult avg = parts.front();
  const double k = static_cast<double>(parts.size());
  avg.rho = avg.r_squared = 0.0;
  avg.degenerate = true;
  std::fill(avg.dc1.begin(), avg.dc1.end(), 0.0);
  avg.distances.values.setZero();
  for (const IntraLayerResult& p : parts) {
    for (std::size_t i = 0; i < avg.dc1.size(); ++i) avg.dc1[i] += p.dc1[i] / k;
    avg.rho += p.rho / k;
    avg.r_squared += p.r_squared / k;
    avg.degenerate = avg.degenerate && p.degenerate;
    avg.distances.values += p.distances.values / k;
  }
  return avg;
}

InterLayerResult inter_layer(const CentroidSet& centroids, const std::vector<LayerInfo>& layers,
                             const std::vector<std::string>& noise_types, int snr_db, const DiffusionConfig& config) {
  config.validate();
  InterLayerResult r;
  r.snr_db = snr_db;
  std::vector<const LayerInfo*> chosen;
  for (const LayerInfo& l : layers) {
    if (config.inter_layers == InterLayers::FirstInBlock && !l.first_in_block) continue;
    if (l.block == kLatentBlock) {
      r.excluded.push_back(l.id);
      continue;
    }
    chosen.push_back(&l);
  }
  if (chosen.size() < 2) throw Error(ErrorCode::TooFewRows, "inter-layer analysis needs at least two layers");
  const std::size_t dim = chosen.front()->dim();
  for (const LayerInfo* l : chosen) {
    if (l->dim() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "layer " + l->id + " has dimension " + std::to_string(l->dim()) +
                                                    ", expected " + std::to_string(dim));
    }
  }

  std::vector<std::vector<double>> points;
  std::vector<std::string> labels;
  for (const LayerInfo* l : chosen) {
    r.layers.push_back(l->id);
    points.push_back(noise_averaged_centroid(centroids, l->id, snr_db, noise_types));
    labels.push_back(l->id);
  }
  if (config.include_clean_reference) {
    for (const LayerInfo* l : chosen) {
      points.push_back(centroids.at(CellKey::clean_ref(l->id)));
      labels.push_back(l->id + "@clean");
    }
  }
  r.distances = diffusion_distances(diffusion_map(stack_rows(points), labels, config));
  return r;
}

}  // namespace snrprobe
