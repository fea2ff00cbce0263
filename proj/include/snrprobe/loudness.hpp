#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include "snrprobe/audio.hpp"

namespace snrprobe {

/// Direct-form biquad, a0 normalised to 1.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 3> a{1.0, 0.0, 0.0};

  /// Magnitude response in dB at `freq_hz`.
  double magnitude_db(double freq_hz, double rate_hz) const;
};

/// The two K-weighting stages (high shelf, then high pass) for `rate_hz`.
/// At 48 kHz these reproduce the tabulated BS.1770 coefficients.
std::array<Biquad, 2> k_weighting(double rate_hz);

/// Applies K-weighting to a copy of the samples (zero initial state).
std::vector<double> k_weight(const AudioClip& clip);

/// Per-block mean square of the K-weighted signal: 400 ms blocks, 100 ms hop.
std::vector<double> gating_block_powers(const AudioClip& clip);

inline constexpr double kAllGated = -std::numeric_limits<double>::infinity();
inline constexpr double kAbsoluteGateLufs = -70.0;
inline constexpr double kRelativeGateLu = -10.0;

/// Loudness of one block mean square.
double block_loudness(double mean_square);

/// Gated integrated loudness in LUFS. Returns kAllGated when every block is
/// below the absolute gate; throws TooShort when the clip is under 400 ms.
double measure_lufs(const AudioClip& clip);

struct NormalizedClip {
  AudioClip clip;
  double post_gain = 1.0;
  double measured_lufs = 0.0;
  bool exceeds_full_scale = false;
};

/// Scales to `target_lufs`. Never clips; `exceeds_full_scale` reports |x| > 1.
/// Throws SilentInput when the clip is fully gated.
NormalizedClip normalize_lufs(const AudioClip& clip, double target_lufs);

}  // namespace snrprobe
