#include "snrprobe/loudness.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "snrprobe/error.hpp"

namespace snrprobe {
namespace {

// Analog prototypes of the two K-weighting stages, parametrised so that a
// plain bilinear transform at 48 kHz yields the tabulated coefficients.
constexpr double kShelfFreq = 1681.974450955533;
constexpr double kShelfGainDb = 3.999843853973347;
constexpr double kShelfQ = 0.7071752369554196;
constexpr double kShelfBandExponent = 0.4996667741545416;
constexpr double kHighPassFreq = 38.13547087602444;
constexpr double kHighPassQ = 0.5003270373238773;

constexpr double kBlockSeconds = 0.4;
constexpr double kHopSeconds = 0.1;
constexpr double kLoudnessOffset = -0.691;

// Bilinear map of (v2 u^2 + v1 u + v0) / (u^2 + u/q + 1) scaled by omega,
// where u = s / omega_analog. Prewarping at the stage's own centre frequency
// makes omega = tan(pi f0 / rate) for any rate.
Biquad bilinear_section(double omega, double q, double v2, double v1, double v0) {
  const double k2 = omega * omega;
  const double a0 = 1.0 + omega / q + k2;
  Biquad bq;
  bq.b = {(v2 + v1 * omega / q + v0 * k2) / a0, 2.0 * (v0 * k2 - v2) / a0,
          (v2 - v1 * omega / q + v0 * k2) / a0};
  bq.a = {1.0, 2.0 * (k2 - 1.0) / a0, (1.0 - omega / q + k2) / a0};
  return bq;
}

void run_biquad(const Biquad& bq, std::vector<double>& x) {
  double s1 = 0.0, s2 = 0.0;  // transposed direct form II
  for (double& v : x) {
    const double in = v;
    const double out = bq.b[0] * in + s1;
    s1 = bq.b[1] * in - bq.a[1] * out + s2;
    s2 = bq.b[2] * in - bq.a[2] * out;
    v = out;
  }
}

}  // namespace

double Biquad::magnitude_db(double freq_hz, double rate_hz) const {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / rate_hz);
  const std::complex<double> z2 = z1 * z1;
  const auto num = b[0] + b[1] * z1 + b[2] * z2;
  const auto den = a[0] + a[1] * z1 + a[2] * z2;
  return 20.0 * std::log10(std::abs(num / den));
}

std::array<Biquad, 2> k_weighting(double rate_hz) {
  if (!(rate_hz > 2.0 * kShelfFreq)) throw Error(ErrorCode::InvalidArgument, "sample rate too low for K-weighting");
  const double vh = std::pow(10.0, kShelfGainDb / 20.0);
  const double vb = std::pow(vh, kShelfBandExponent);
  const double shelf_omega = std::tan(std::numbers::pi * kShelfFreq / rate_hz);
  const double hp_omega = std::tan(std::numbers::pi * kHighPassFreq / rate_hz);

  Biquad shelf = bilinear_section(shelf_omega, kShelfQ, vh, vb, 1.0);
  // The tabulated high pass keeps the unnormalised numerator 1, -2, 1.
  Biquad high_pass = bilinear_section(hp_omega, kHighPassQ, 1.0, 0.0, 0.0);
  high_pass.b = {1.0, -2.0, 1.0};
  return {shelf, high_pass};
}

std::vector<double> k_weight(const AudioClip& clip) {
  std::vector<double> y = clip.samples;
  for (const Biquad& bq : k_weighting(clip.sample_rate_hz)) run_biquad(bq, y);
  return y;
}

std::vector<double> gating_block_powers(const AudioClip& clip) {
  const auto block = static_cast<std::size_t>(std::llround(kBlockSeconds * clip.sample_rate_hz));
  const auto hop = static_cast<std::size_t>(std::llround(kHopSeconds * clip.sample_rate_hz));
  if (clip.size() < block) {
    throw Error(ErrorCode::TooShort, "clip shorter than one 400 ms gating block");
  }
  const std::vector<double> y = k_weight(clip);
  std::vector<double> powers;
  powers.reserve((y.size() - block) / hop + 1);
  for (std::size_t start = 0; start + block <= y.size(); start += hop) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + block; ++i) acc += y[i] * y[i];
    powers.push_back(acc / static_cast<double>(block));
  }
  return powers;
}

double block_loudness(double mean_square) { return kLoudnessOffset + 10.0 * std::log10(mean_square); }

double measure_lufs(const AudioClip& clip) {
  const std::vector<double> powers = gating_block_powers(clip);

  double abs_sum = 0.0;
  std::size_t abs_count = 0;
  for (double z : powers) {
    if (block_loudness(z) > kAbsoluteGateLufs) {
      abs_sum += z;
      ++abs_count;
    }
  }
  if (abs_count == 0) return kAllGated;

  const double relative_gate = block_loudness(abs_sum / static_cast<double>(abs_count)) + kRelativeGateLu;
  double sum = 0.0;
  std::size_t count = 0;
  for (double z : powers) {
    const double l = block_loudness(z);
    if (l > kAbsoluteGateLufs && l > relative_gate) {
      sum += z;
      ++count;
    }
  }
  return block_loudness(sum / static_cast<double>(count));
}

NormalizedClip normalize_lufs(const AudioClip& clip, double target_lufs) {
  NormalizedClip out;
  out.measured_lufs = measure_lufs(clip);
  if (out.measured_lufs == kAllGated) throw Error(ErrorCode::SilentInput, "clip is fully gated");
  out.post_gain = std::pow(10.0, (target_lufs - out.measured_lufs) / 20.0);
  out.clip.sample_rate_hz = clip.sample_rate_hz;
  out.clip.samples.resize(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    out.clip.samples[i] = out.post_gain * clip.samples[i];
    if (std::abs(out.clip.samples[i]) > 1.0) out.exceeds_full_scale = true;
  }
  return out;
}

}  // namespace snrprobe
