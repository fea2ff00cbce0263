#include "snrprobe/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "snrprobe/error.hpp"
#include "snrprobe/hash.hpp"
#include "snrprobe/loudness.hpp"

namespace snrprobe {

std::vector<int> SweepConfig::make_grid(int lo, int hi) {
  if (hi < lo) throw Error(ErrorCode::ConfigError, "snr-max below snr-min");
  std::vector<int> grid;
  for (int s = lo; s <= hi; ++s) grid.push_back(s);
  return grid;
}

void SweepConfig::validate() const {
  if (snr_grid_db.empty()) throw Error(ErrorCode::ConfigError, "empty SNR grid");
  for (std::size_t i = 1; i < snr_grid_db.size(); ++i) {
    if (snr_grid_db[i] <= snr_grid_db[i - 1]) throw Error(ErrorCode::ConfigError, "SNR grid must be strictly increasing");
  }
  if (!(clip_duration_s > 0.0) || !(window_duration_s > 0.0)) {
    throw Error(ErrorCode::ConfigError, "durations must be positive");
  }
  if (window_duration_s > clip_duration_s) throw Error(ErrorCode::ConfigError, "window longer than clip");
}

nlohmann::json MixtureManifest::to_json() const {
  nlohmann::json j;
  j["schema"] = "snrprobe.mixtures/1";
  j["config"] = {{"snr_grid_db", config.snr_grid_db},
                 {"clip_duration_s", config.clip_duration_s},
                 {"window_duration_s", config.window_duration_s},
                 {"target_lufs", config.target_lufs}};
  j["master_seed"] = master_seed;
  j["utterances"] = utterances;
  j["noise_types"] = noise_types;
  auto& list = j["entries"] = nlohmann::json::array();
  for (const MixtureSpec& e : entries) {
    list.push_back({{"utterance_id", e.utterance_id},
                    {"noise_type", e.noise_type},
                    {"target_snr_db", e.target_snr_db},
                    {"master_seed", e.master_seed},
                    {"noise_offset", e.noise_offset},
                    {"noise_gain", e.noise_gain},
                    {"post_gain", e.post_gain},
                    {"pre_norm_lufs", e.pre_norm_lufs},
                    {"realized_snr_db", e.realized_snr_db},
                    {"padded", e.padded},
                    {"warnings", e.warnings},
                    {"path", e.path}});
  }
  auto& failed = j["failures"] = nlohmann::json::array();
  for (const MixtureFailure& f : failures) {
    failed.push_back({{"utterance_id", f.utterance_id},
                      {"noise_type", f.noise_type},
                      {"target_snr_db", f.target_snr_db},
                      {"message", f.message}});
  }
  return j;
}

std::string noise_offset_key(const std::string& utterance_id, const std::string& noise_type) {
  return utterance_id + "/" + noise_type;
}

MixtureComponents render_mixture(const AudioClip& trimmed_clean, bool padded, const AudioClip& noise,
                                 const std::string& utterance_id, const std::string& noise_type,
                                 int snr_db_target, std::uint64_t master_seed, double target_lufs) {
  NoiseSegment seg = select_noise_segment(noise, trimmed_clean.size(), master_seed,
                                          noise_offset_key(utterance_id, noise_type));
  ScaledNoise scaled = scale_noise_to_snr(trimmed_clean, seg.clip, snr_db_target);

  AudioClip mixture;
  mixture.sample_rate_hz = trimmed_clean.sample_rate_hz;
  mixture.samples.resize(trimmed_clean.size());
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    mixture.samples[i] = trimmed_clean.samples[i] + scaled.noise.samples[i];
  }
  NormalizedClip norm = normalize_lufs(mixture, target_lufs);

  MixtureComponents out;
  out.clean = trimmed_clean;
  out.noise = std::move(scaled.noise);
  for (double& s : out.clean.samples) s *= norm.post_gain;
  for (double& s : out.noise.samples) s *= norm.post_gain;
  out.mixture = std::move(norm.clip);

  MixtureSpec& spec = out.spec;
  spec.utterance_id = utterance_id;
  spec.noise_type = noise_type;
  spec.target_snr_db = snr_db_target;
  spec.master_seed = master_seed;
  spec.noise_offset = seg.offset;
  spec.noise_gain = scaled.gain;
  spec.post_gain = norm.post_gain;
  spec.pre_norm_lufs = norm.measured_lufs;
  spec.realized_snr_db = snr_db(out.clean.samples, out.noise.samples);
  spec.padded = padded;
  if (padded) spec.warnings.emplace_back("utterance zero-padded to clip duration");
  if (norm.exceeds_full_scale) spec.warnings.emplace_back("normalised mixture exceeds full scale");
  return out;
}

std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingInput, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::MissingInput, dir.string() + " contains no .wav files");
  return files;
}

namespace {

std::string snr_tag(int snr) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "snr%+03d", snr);
  return buf;
}

struct CellResult {
  bool ok = false;
  MixtureSpec spec;
  std::string error;
};

}  // namespace

MixtureManifest generate_sweep(const std::filesystem::path& clean_dir, const std::filesystem::path& noise_dir,
                               const std::filesystem::path& out_dir, const SweepConfig& sweep,
                               std::uint64_t master_seed) {
  sweep.validate();
  const auto clean_files = list_wavs(clean_dir);
  const auto noise_files = list_wavs(noise_dir);

  MixtureManifest manifest;
  manifest.config = sweep;
  manifest.master_seed = master_seed;

  struct Utterance {
    std::string id;
    AudioClip trimmed;
    bool padded = false;
    std::string error;
  };
  std::vector<Utterance> utterances;
  for (const auto& f : clean_files) {
    Utterance u{f.stem().string(), {}, false, {}};
    try {
      TrimResult t = center_trim(read_wav(f), sweep.clip_duration_s);
      u.trimmed = std::move(t.clip);
      u.padded = t.padded;
    } catch (const Error& e) {
      u.error = e.what();
    }
    manifest.utterances.push_back(u.id);
    utterances.push_back(std::move(u));
  }

  struct Noise {
    std::string type;
    AudioClip clip;
    std::string error;
  };
  std::vector<Noise> noises;
  for (const auto& f : noise_files) {
    Noise n{f.stem().string(), {}, {}};
    try {
      n.clip = read_wav(f);
    } catch (const Error& e) {
      n.error = e.what();
    }
    manifest.noise_types.push_back(n.type);
    noises.push_back(std::move(n));
  }

  for (const Noise& n : noises) std::filesystem::create_directories(out_dir / n.type);

  const std::size_t n_snr = sweep.snr_grid_db.size();
  const std::size_t n_cells = utterances.size() * noises.size() * n_snr;
  std::vector<CellResult> cells(n_cells);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_cells); ++c) {
    const auto idx = static_cast<std::size_t>(c);
    const Utterance& u = utterances[idx / (noises.size() * n_snr)];
    const Noise& n = noises[(idx / n_snr) % noises.size()];
    const int snr = sweep.snr_grid_db[idx % n_snr];
    CellResult& out = cells[idx];
    out.spec.utterance_id = u.id;
    out.spec.noise_type = n.type;
    out.spec.target_snr_db = snr;
    if (!u.error.empty() || !n.error.empty()) {
      out.error = u.error.empty() ? n.error : u.error;
      continue;
    }
    try {
      MixtureComponents m = render_mixture(u.trimmed, u.padded, n.clip, u.id, n.type, snr, master_seed,
                                           sweep.target_lufs);
      m.spec.path = (std::filesystem::path(n.type) / (u.id + "_" + snr_tag(snr) + ".wav")).generic_string();
      write_wav_f32(m.mixture, out_dir / m.spec.path);
      out.spec = std::move(m.spec);
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  std::map<std::string, std::size_t> valid_per_utterance;
  for (const Utterance& u : utterances) valid_per_utterance[u.id] = 0;
  for (CellResult& c : cells) {
    if (c.ok) {
      ++valid_per_utterance[c.spec.utterance_id];
      manifest.entries.push_back(std::move(c.spec));
    } else {
      manifest.failures.push_back({c.spec.utterance_id, c.spec.noise_type, c.spec.target_snr_db, c.error});
    }
  }

  std::ofstream(out_dir / "manifest.json") << manifest.to_json().dump(2) << '\n';

  for (const auto& [id, count] : valid_per_utterance) {
    if (count == 0) {
      throw Error(ErrorCode::StageFailure, "utterance " + id + " produced no valid mixtures");
    }
  }
  return manifest;
}

}  // namespace snrprobe
