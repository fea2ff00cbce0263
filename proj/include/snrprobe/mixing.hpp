#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "snrprobe/audio.hpp"

namespace snrprobe {

struct SweepConfig {
  std::vector<int> snr_grid_db = default_grid();
  double clip_duration_s = 10.0;
  double window_duration_s = 1.9;
  double target_lufs = -23.0;

  static std::vector<int> make_grid(int lo, int hi);
  static std::vector<int> default_grid() { return make_grid(-10, 30); }
  /// Throws ConfigError on a non-increasing grid or bad durations.
  void validate() const;
};

/// Recipe and realised gains of one generated mixture.
struct MixtureSpec {
  std::string utterance_id;
  std::string noise_type;
  int target_snr_db = 0;
  std::uint64_t master_seed = 0;
  std::size_t noise_offset = 0;
  double noise_gain = 0.0;
  double post_gain = 0.0;
  double pre_norm_lufs = 0.0;
  double realized_snr_db = 0.0;
  bool padded = false;
  std::vector<std::string> warnings;
  std::string path;  // relative to the output directory
};

struct MixtureFailure {
  std::string utterance_id;
  std::string noise_type;
  int target_snr_db = 0;
  std::string message;
};

struct MixtureManifest {
  SweepConfig config;
  std::uint64_t master_seed = 0;
  std::vector<std::string> utterances;
  std::vector<std::string> noise_types;
  std::vector<MixtureSpec> entries;  // sorted by (utterance, noise, snr)
  std::vector<MixtureFailure> failures;

  nlohmann::json to_json() const;
};

/// The clean and scaled-noise components of a mixture after loudness
/// normalisation; `mixture` is their sum.
struct MixtureComponents {
  AudioClip clean;
  AudioClip noise;
  AudioClip mixture;
  MixtureSpec spec;
};

/// Stable key used to seed the noise offset of an (utterance, noise) pair.
/// The offset does not depend on SNR, so a sweep reuses one noise segment.
std::string noise_offset_key(const std::string& utterance_id, const std::string& noise_type);

/// Builds one mixture: select segment, scale to SNR, add, LUFS-normalise.
/// `trimmed_clean` is the centre-trimmed utterance.
MixtureComponents render_mixture(const AudioClip& trimmed_clean, bool padded, const AudioClip& noise,
                                 const std::string& utterance_id, const std::string& noise_type,
                                 int snr_db, std::uint64_t master_seed, double target_lufs);

/// Mixes every (utterance, noise type, SNR) cell into `out_dir` as float32
/// WAVs and writes `manifest.json`. Output bytes do not depend on the
/// number of threads.
MixtureManifest generate_sweep(const std::filesystem::path& clean_dir, const std::filesystem::path& noise_dir,
                               const std::filesystem::path& out_dir, const SweepConfig& sweep,
                               std::uint64_t master_seed);

/// Sorted `*.wav` files of a directory.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

}  // namespace snrprobe
