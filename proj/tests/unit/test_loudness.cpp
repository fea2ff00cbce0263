#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "snrprobe/error.hpp"
#include "snrprobe/loudness.hpp"
#include "snrprobe/random.hpp"

using namespace snrprobe;

namespace {

AudioClip sine(double freq, double amp, double seconds, int rate = 16000) {
  AudioClip c;
  c.sample_rate_hz = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return c;
}

// Direct form I over both stages; gating per the standard, written out long-hand.
double reference_lufs(const AudioClip& clip) {
  auto stages = k_weighting(clip.sample_rate_hz);
  std::vector<double> y = clip.samples;
  for (const Biquad& q : stages) {
    std::vector<double> out(y.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double v = q.b[0] * y[i] + q.b[1] * x1 + q.b[2] * x2 - q.a[1] * y1 - q.a[2] * y2;
      x2 = x1;
      x1 = y[i];
      y2 = y1;
      y1 = v;
      out[i] = v;
    }
    y = out;
  }
  const std::size_t block = static_cast<std::size_t>(0.4 * clip.sample_rate_hz);
  const std::size_t hop = static_cast<std::size_t>(0.1 * clip.sample_rate_hz);
  std::vector<double> z;
  for (std::size_t s = 0; s + block <= y.size(); s += hop) {
    double acc = 0;
    for (std::size_t i = s; i < s + block; ++i) acc += y[i] * y[i];
    z.push_back(acc / block);
  }
  auto loud = [](double ms) { return -0.691 + 10 * std::log10(ms); };
  std::vector<double> abs_kept;
  for (double v : z)
    if (loud(v) > -70.0) abs_kept.push_back(v);
  if (abs_kept.empty()) return -INFINITY;
  double mean = 0;
  for (double v : abs_kept) mean += v;
  mean /= abs_kept.size();
  const double rel = loud(mean) - 10.0;
  double acc = 0;
  std::size_t count = 0;
  for (double v : abs_kept)
    if (loud(v) > rel) {
      acc += v;
      ++count;
    }
  return loud(acc / count);
}

}  // namespace

TEST_SUITE("loudness") {
  TEST_CASE("48 kHz coefficients match the tabulated filter") {
    auto k = k_weighting(48000.0);
    const double shelf_b[] = {1.53512485958697, -2.69169618940638, 1.19839281085285};
    const double shelf_a[] = {1.0, -1.69065929318241, 0.73248077421585};
    const double hp_b[] = {1.0, -2.0, 1.0};
    const double hp_a[] = {1.0, -1.99004745483398, 0.99007225036621};
    for (int i = 0; i < 3; ++i) {
      CHECK(k[0].b[i] == doctest::Approx(shelf_b[i]).epsilon(1e-9));
      CHECK(k[0].a[i] == doctest::Approx(shelf_a[i]).epsilon(1e-9));
      CHECK(k[1].b[i] == doctest::Approx(hp_b[i]).epsilon(1e-9));
      CHECK(k[1].a[i] == doctest::Approx(hp_a[i]).epsilon(1e-9));
    }
  }

  TEST_CASE("16 kHz response tracks the 48 kHz reference") {
    // Bilinear warping near Nyquist leaves about 0.15 dB at the top of the
    // band; the bound is the measured worst case rounded up.
    auto k16 = k_weighting(16000.0);
    auto k48 = k_weighting(48000.0);
    double worst = 0.0;
    for (double f = 20.0; f <= 7000.0; f *= 1.02) {
      const double r16 = k16[0].magnitude_db(f, 16000) + k16[1].magnitude_db(f, 16000);
      const double r48 = k48[0].magnitude_db(f, 48000) + k48[1].magnitude_db(f, 48000);
      worst = std::max(worst, std::abs(r16 - r48));
    }
    MESSAGE("worst deviation (dB): " << worst);
    CHECK(worst < 0.16);
  }

  TEST_CASE("997 Hz full-scale sine at 16 kHz") {
    double l = measure_lufs(sine(997.0, 1.0, 10.0));
    CHECK(std::abs(l - (-3.01)) <= 0.1);
  }

  TEST_CASE("matches a long-hand meter on random material") {
    SeededStream rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      AudioClip c;
      const std::size_t n = 16000 * (2 + trial);
      for (std::size_t i = 0; i < n; ++i) {
        const double env = (i / 4000) % 3 == 0 ? 0.001 : 0.3;
        c.samples.push_back(env * rng.normal());
      }
      CHECK(measure_lufs(c) == doctest::Approx(reference_lufs(c)).epsilon(1e-9));
    }
  }

  TEST_CASE("silence is fully gated") {
    AudioClip c;
    c.samples.assign(16000, 0.0);
    CHECK(measure_lufs(c) == kAllGated);
    CHECK_THROWS_AS(normalize_lufs(c, -23.0), Error);
  }

  TEST_CASE("clips shorter than one gating block are rejected") {
    AudioClip c = sine(440, 0.5, 0.3);
    try {
      measure_lufs(c);
      FAIL("expected TooShort");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooShort);
    }
  }

  TEST_CASE("halving the amplitude lowers loudness by 20 log10 2") {
    AudioClip c = sine(500.0, 0.8, 5.0);
    AudioClip h = c;
    for (double& s : h.samples) s *= 0.5;
    CHECK(measure_lufs(c) - measure_lufs(h) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));
  }

  TEST_CASE("gain equivariance with an unchanged gate set") {
    SeededStream rng(8);
    AudioClip c;
    for (int i = 0; i < 48000; ++i) c.samples.push_back(0.1 * rng.normal());
    const double base = measure_lufs(c);
    for (double g : {0.25, 0.9, 1.7}) {
      AudioClip s = c;
      for (double& v : s.samples) v *= g;
      CHECK(std::abs(measure_lufs(s) - (base + 20.0 * std::log10(g))) < 1e-6);
    }
  }

  TEST_CASE("normalize_lufs gain and fixed point") {
    AudioClip c = sine(300.0, 0.3, 4.0);
    const double measured = measure_lufs(c);
    NormalizedClip down = normalize_lufs(c, measured - 3.0);
    CHECK(down.post_gain == doctest::Approx(std::pow(10.0, -3.0 / 20.0)).epsilon(1e-12));
    CHECK(std::abs(measure_lufs(down.clip) - (measured - 3.0)) <= 0.05);

    NormalizedClip same = normalize_lufs(c, measured);
    CHECK(same.post_gain == doctest::Approx(1.0).epsilon(1e-12));

    NormalizedClip loud = normalize_lufs(c, 0.0);
    CHECK(loud.exceeds_full_scale);
    CHECK(std::abs(measure_lufs(loud.clip)) <= 0.05);
  }
}
