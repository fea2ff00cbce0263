#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>
#include <json.hpp>

#include "snrprobe/audio.hpp"
#include "snrprobe/random.hpp"

namespace fs = std::filesystem;

namespace snrprobe::fixtures {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void scale_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

void save(const std::vector<double>& x, const fs::path& path) {
  AudioClip clip{x, kCanonicalRateHz};
  write_wav_pcm16(clip, path);
}

struct BlockPlan {
  std::string name;
  std::size_t rows, cols;  // pooled shape
  double drift;
  double base_a, base_b;  // clean centroid on the last two features
};

const std::vector<BlockPlan>& plan() {
  // Mirrored encoder/decoder pairs start close together; decoders drift far
  // as SNR drops, refinement less so.
  static const std::vector<BlockPlan> p{{"enc1", 4, 4, 0.05, 0.0, 0.0}, {"enc2", 4, 4, 0.1, 1.0, 0.0},
                                        {"latent", 3, 4, 2.0, 0.5, 0.0}, {"dec2", 4, 4, 3.0, 1.0, 0.2},
                                        {"dec1", 4, 4, 3.0, 0.0, 0.2},   {"refine", 4, 4, 1.0, -1.0, 0.0}};
  return p;
}

// Orthonormal basis of R^n whose first column is the normalised ones vector.
Eigen::MatrixXd sample_basis(std::size_t n, SeededStream& rng) {
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, 0) = 1.0;
    for (std::size_t j = 1; j < n; ++j) m(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

const std::vector<std::string>& fixture_blocks() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& b : plan()) v.push_back(b.name);
    return v;
  }();
  return names;
}

std::vector<double> speech_like(std::size_t n, int rate, double f0, std::uint64_t seed) {
  SeededStream rng(seed);
  std::vector<double> x(n);
  const double syl_rate = 3.5 + rng.uniform();
  const double syl_phase = kTwoPi * rng.uniform();
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + 0.08 * std::sin(kTwoPi * 0.4 * t + syl_phase));
    phase += kTwoPi * f / rate;
    double s = 0.0;
    for (int k = 1; k <= 14; ++k) {
      const double fk = k * f;
      // Two broad formant bumps.
      const double formant = std::exp(-std::pow((fk - 600.0) / 300.0, 2)) + 0.6 * std::exp(-std::pow((fk - 1800.0) / 500.0, 2));
      s += (0.15 / k + formant) * std::sin(k * phase);
    }
    const double syl = std::sin(kTwoPi * syl_rate * t + syl_phase);
    const double word_gap = std::sin(kTwoPi * 0.45 * t + 2.0 * syl_phase) > -0.7 ? 1.0 : 0.1;
    const double env = (0.05 + 0.95 * syl * syl) * word_gap;
    x[i] = env * s + 0.01 * rng.normal();
  }
  scale_peak(x, 0.5);
  return x;
}

void write_audio_fixture(const fs::path& dir) {
  const int rate = kCanonicalRateHz;
  auto len = [&](double s) { return static_cast<std::size_t>(s * rate); };
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "noise");
  save(speech_like(len(12.0), rate, 120.0, 11), dir / "clean" / "u01.wav");
  save(speech_like(len(9.0), rate, 190.0, 12), dir / "clean" / "u02.wav");

  std::vector<double> babble(len(14.0), 0.0);
  for (int talker = 0; talker < 6; ++talker) {
    std::vector<double> v = speech_like(babble.size(), rate, 100.0 + 23.0 * talker, 100 + static_cast<std::uint64_t>(talker));
    for (std::size_t i = 0; i < babble.size(); ++i) babble[i] += v[i];
  }
  scale_peak(babble, 0.4);
  save(babble, dir / "noise" / "babble.wav");

  SeededStream rng(7);
  std::vector<double> hum(len(5.0));
  for (std::size_t i = 0; i < hum.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    hum[i] = 0.3 * std::sin(kTwoPi * 50.0 * t) + 0.15 * std::sin(kTwoPi * 100.0 * t + 0.3) +
             0.08 * std::sin(kTwoPi * 150.0 * t + 1.1) + 0.02 * rng.normal();
  }
  scale_peak(hum, 0.3);
  save(hum, dir / "noise" / "hum.wav");
}

std::vector<LayerTruth> write_activation_fixture(const fs::path& dir, const DriftSpec& spec) {
  const std::size_t n = spec.utterances;
  if (n < 4) throw std::invalid_argument("need at least 4 utterances");
  const std::size_t x_rank = (n - 1) / 2;
  const std::size_t e_rank = n - 1 - x_rank;
  const std::size_t n_noise = spec.noise_types.size();
  const std::string ext = spec.container == Container::Npy ? ".npy" : ".tnsr";

  std::vector<std::string> utts;
  for (std::size_t u = 0; u < n; ++u) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt%02zu", u + 1);
    utts.push_back(buf);
  }

  nlohmann::json layers_json = nlohmann::json::array();
  nlohmann::json entries = nlohmann::json::array();
  std::vector<LayerTruth> truth;

  std::size_t depth = 0;
  for (std::size_t b = 0; b < plan().size(); ++b) {
    const BlockPlan& bp = plan()[b];
    for (std::size_t li = 0; li < spec.layers_per_block; ++li, ++depth) {
      const std::string id = bp.name + "_l" + std::to_string(li);
      const std::size_t d = bp.rows * bp.cols;
      const std::size_t hx = d / 2;
      SeededStream rng(derive_seed(spec.seed, id));

      LayerTruth t;
      t.id = id;
      t.block = bp.name;
      t.slope = 0.002 + 0.0008 * static_cast<double>(depth);
      t.intercept = 0.9 - 0.03 * static_cast<double>(depth);
      t.drift_amplitude = bp.drift;
      truth.push_back(t);

      nlohmann::json lj{{"id", id},
                        {"block", bp.name},
                        {"first_in_block", li == 0},
                        {"skip_input", li + 1 == spec.layers_per_block && bp.name.rfind("enc", 0) == 0},
                        {"skip_output", li == 0 && bp.name.rfind("dec", 0) == 0},
                        {"token_axis", 0},
                        {"axes", {"time", "freq", "chan"}}};
      layers_json.push_back(lj);

      Eigen::MatrixXd basis = sample_basis(n, rng);
      Eigen::MatrixXd a(x_rank, hx), e_coef(e_rank, d - hx);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
      for (Eigen::Index i = 0; i < e_coef.size(); ++i) e_coef.data()[i] = rng.normal();
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d), e = Eigen::MatrixXd::Zero(n, d);
      x.leftCols(hx) = basis.middleCols(1, x_rank) * a;
      e.rightCols(d - hx) = basis.middleCols(1 + x_rank, e_rank) * e_coef;
      const double gx = (x.transpose() * x).squaredNorm();
      const double ge = (e.transpose() * e).squaredNorm();
      const double r = ge / gx;

      Eigen::VectorXd base(d), v(d);
      for (std::size_t k = 0; k < d; ++k) base(k) = 0.0;
      base(static_cast<Eigen::Index>(d - 1)) = bp.base_a;
      base(static_cast<Eigen::Index>(d - 2)) = bp.base_b;
      for (std::size_t k = 0; k < d; ++k) v(k) = rng.normal();
      v.normalize();
      std::vector<Eigen::VectorXd> jitter(spec.tokens, Eigen::VectorXd::Zero(d));

      auto emit = [&](const Eigen::VectorXd& pooled, const std::string& rel, nlohmann::json entry) {
        ActivationTensor tensor;
        tensor.layer_id = id;
        tensor.shape = {spec.tokens, bp.rows, bp.cols};
        tensor.dtype = spec.dtype;
        tensor.data.resize(spec.tokens * d);
        // Zero-mean jitter over the token axis keeps the pooled vector exact.
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t tk = 0; tk < spec.tokens; ++tk) {
          for (std::size_t k = 0; k < d; ++k) jitter[tk](k) = 0.1 * rng.normal();
          mean += jitter[tk];
        }
        mean /= static_cast<double>(spec.tokens);
        for (std::size_t tk = 0; tk < spec.tokens; ++tk)
          for (std::size_t k = 0; k < d; ++k) tensor.data[tk * d + k] = pooled(k) + jitter[tk](k) - mean(k);
        write_tensor(tensor, dir / rel, spec.container);
        entry["layer"] = id;
        entry["path"] = rel;
        entries.push_back(std::move(entry));
      };

      fs::create_directories(dir / id);
      for (std::size_t u = 0; u < n; ++u) {
        Eigen::VectorXd row = base + x.row(u).transpose();
        emit(row, id + "/clean_" + utts[u] + ext, {{"condition", "clean"}, {"utterance", utts[u]}});
      }
      for (std::size_t k = 0; k < n_noise; ++k) {
        const double offset = n_noise == 1 ? 0.0 : 0.01 * (2.0 * static_cast<double>(k) / (n_noise - 1) - 1.0);
        for (int snr = spec.snr_min; snr <= spec.snr_max; ++snr) {
          const double c = t.intercept + t.slope * snr + offset;
          const double sigma = std::pow((1.0 / (c * c) - 1.0) / r, 0.25);
          const double g = (30.0 - snr) / 40.0;
          for (std::size_t u = 0; u < n; ++u) {
            Eigen::VectorXd row = base + bp.drift * g * v + x.row(u).transpose() + sigma * e.row(u).transpose();
            const std::string rel =
                id + "/" + spec.noise_types[k] + "_" + std::to_string(snr) + "_" + utts[u] + ext;
            emit(row, rel,
                 {{"condition", "noisy"}, {"noise", spec.noise_types[k]}, {"snr_db", snr}, {"utterance", utts[u]}});
          }
        }
      }
    }
  }

  nlohmann::json manifest{{"schema", "snrprobe.activations/1"}, {"layers", layers_json}, {"entries", entries}};
  std::ofstream out(dir / "activations_manifest.json");
  out << manifest.dump(1) << '\n';
  if (!out) throw std::runtime_error("cannot write activations manifest");
  return truth;
}

}  // namespace snrprobe::fixtures
