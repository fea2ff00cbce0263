#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace snrprobe {

inline constexpr int kCanonicalRateHz = 16000;

/// Mono waveform, full scale = 1.0.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = kCanonicalRateHz;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Throws InvalidArgument unless the clip is nonempty, finite, with a positive rate.
void validate(const AudioClip& clip);

/// Reads a mono PCM16 or IEEE float32 RIFF/WAVE file. No resampling: any rate
/// other than `expected_rate_hz` is UnsupportedFormat.
AudioClip read_wav(const std::filesystem::path& path, int expected_rate_hz = kCanonicalRateHz);

/// Writes IEEE float32 samples. Output bytes are a pure function of the clip.
void write_wav_f32(const AudioClip& clip, const std::filesystem::path& path);

/// Writes 16-bit PCM with round-to-nearest and saturation.
void write_wav_pcm16(const AudioClip& clip, const std::filesystem::path& path);

struct TrimResult {
  AudioClip clip;
  bool padded = false;
};

/// Keeps the centred span of round(duration_s * rate) samples, or zero-pads
/// symmetrically. Odd remainders go to the trailing side.
TrimResult center_trim(const AudioClip& clip, double duration_s);

struct NoiseSegment {
  AudioClip clip;
  std::size_t offset = 0;
};

/// Reads `length` samples starting at hash(seed, key) mod N, wrapping around.
NoiseSegment select_noise_segment(const AudioClip& noise, std::size_t length, std::uint64_t seed,
                                  std::string_view key);

/// Mean square amplitude.
double signal_power(std::span<const double> samples);
inline double signal_power(const AudioClip& clip) { return signal_power(clip.samples); }

struct ScaledNoise {
  AudioClip noise;
  double gain = 0.0;
};

/// Scales `noise` so that 10*log10(P_clean / P_noise') equals `snr_db`.
ScaledNoise scale_noise_to_snr(const AudioClip& clean, const AudioClip& noise, double snr_db);

/// 10*log10(P_signal / P_noise).
double snr_db(std::span<const double> signal, std::span<const double> noise);

/// Consecutive non-overlapping windows; a trailing partial window is dropped.
std::vector<AudioClip> window(const AudioClip& clip, double window_s);

}  // namespace snrprobe
