#pragma once

// Deterministic synthetic inputs for tests and the bundled example run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snrprobe/tensor.hpp"

namespace snrprobe::fixtures {

/// Speech-like harmonic source with a syllabic envelope.
std::vector<double> speech_like(std::size_t n, int rate, double f0, std::uint64_t seed);

/// clean/u01.wav (12 s), clean/u02.wav (9 s), noise/babble.wav (14 s),
/// noise/hum.wav (5 s); PCM16 at 16 kHz.
void write_audio_fixture(const std::filesystem::path& dir);

struct LayerTruth {
  std::string id;
  std::string block;
  double slope = 0.0;      // CKA per dB
  double intercept = 0.0;  // CKA at 0 dB
  double drift_amplitude = 0.0;
};

/// Activation family with closed-form clean-vs-noisy CKA.
/// Per (layer, noise, snr) the utterance matrix is
///   noisy = base + a(layer) g(snr) v + X + sigma E,   clean = base + X,
/// with X and E orthogonal in both sample and feature space, so that
/// CKA(clean, noisy) = 1 / sqrt(1 + sigma^4 r). sigma is solved so that the
/// noise-averaged CKA equals intercept + slope * snr exactly (up to f4
/// rounding). g(snr) = (30 - snr) / 40.
struct DriftSpec {
  std::uint64_t seed = 2024;
  std::size_t utterances = 8;
  std::vector<std::string> noise_types{"babble", "hum"};
  int snr_min = -10;
  int snr_max = 30;
  std::size_t tokens = 5;
  std::size_t layers_per_block = 2;
  Container container = Container::Npy;
  Dtype dtype = Dtype::F4;
};

/// Writes tensors plus activations_manifest.json under `dir`.
std::vector<LayerTruth> write_activation_fixture(const std::filesystem::path& dir, const DriftSpec& spec = {});

/// Block order of the synthetic network.
const std::vector<std::string>& fixture_blocks();

}  // namespace snrprobe::fixtures
