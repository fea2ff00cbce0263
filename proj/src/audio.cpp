#include "snrprobe/audio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "snrprobe/error.hpp"
#include "snrprobe/hash.hpp"

namespace snrprobe {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<unsigned char> wav_header(std::uint16_t format, std::uint16_t bits, int rate,
                                      std::size_t frames) {
  const std::uint32_t block_align = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(frames * block_align);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate) * block_align);
  put_u16(out, static_cast<std::uint16_t>(block_align));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  return out;
}

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (clip.samples.empty()) throw Error(ErrorCode::InvalidArgument, "clip is empty");
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "non-finite sample");
  }
}

AudioClip read_wav(const std::filesystem::path& path, int expected_rate_hz) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::CorruptFile, name + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, block_align = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) throw Error(ErrorCode::CorruptFile, name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::CorruptFile, name + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = get_u16(f);
      channels = get_u16(f + 2);
      rate = get_u32(f + 4);
      block_align = get_u16(f + 12);
      bits = get_u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorCode::CorruptFile, name + ": short extensible fmt chunk");
        format = get_u16(f + 24);  // first two bytes of the SubFormat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1U);
  }

  if (!have_fmt || data == nullptr) throw Error(ErrorCode::CorruptFile, name + ": missing fmt or data chunk");
  if (channels != 1) {
    throw Error(ErrorCode::UnsupportedFormat, name + ": expected mono, got " + std::to_string(channels) + " channels");
  }
  if (static_cast<int>(rate) != expected_rate_hz) {
    throw Error(ErrorCode::UnsupportedFormat,
                name + ": sample rate " + std::to_string(rate) + " Hz, expected " + std::to_string(expected_rate_hz));
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::UnsupportedFormat,
                name + ": codec " + std::to_string(format) + "/" + std::to_string(bits) + " bit not supported");
  }
  if (block_align != bits / 8) throw Error(ErrorCode::CorruptFile, name + ": inconsistent block align");
  if (data_size == 0 || data_size % block_align != 0) {
    throw Error(ErrorCode::CorruptFile, name + ": data chunk size " + std::to_string(data_size));
  }

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  const std::size_t frames = data_size / block_align;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    if (pcm16) {
      const auto v = static_cast<std::int16_t>(get_u16(data + 2 * i));
      clip.samples[i] = static_cast<double>(v) / 32768.0;
    } else {
      const float v = std::bit_cast<float>(get_u32(data + 4 * i));
      if (!std::isfinite(v)) throw Error(ErrorCode::CorruptFile, name + ": non-finite sample");
      clip.samples[i] = v;
    }
  }
  return clip;
}

void write_wav_f32(const AudioClip& clip, const std::filesystem::path& path) {
  auto out = wav_header(kFormatFloat, 32, clip.sample_rate_hz, clip.size());
  for (double s : clip.samples) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
  write_bytes(out, path);
}

void write_wav_pcm16(const AudioClip& clip, const std::filesystem::path& path) {
  auto out = wav_header(kFormatPcm, 16, clip.sample_rate_hz, clip.size());
  for (double s : clip.samples) {
    const double scaled = std::nearbyint(s * 32768.0);
    const double clamped = std::fmin(32767.0, std::fmax(-32768.0, scaled));
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped)));
  }
  write_bytes(out, path);
}

TrimResult center_trim(const AudioClip& clip, double duration_s) {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "trim duration must be positive");
  const auto target = static_cast<std::size_t>(std::llround(duration_s * clip.sample_rate_hz));
  const std::size_t n = clip.size();

  TrimResult result;
  result.clip.sample_rate_hz = clip.sample_rate_hz;
  if (n >= target) {
    const std::size_t lead = (n - target) / 2;
    result.clip.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(lead),
                               clip.samples.begin() + static_cast<std::ptrdiff_t>(lead + target));
  } else {
    const std::size_t lead = (target - n) / 2;
    result.clip.samples.assign(target, 0.0);
    std::copy(clip.samples.begin(), clip.samples.end(),
              result.clip.samples.begin() + static_cast<std::ptrdiff_t>(lead));
    result.padded = true;
  }
  return result;
}

NoiseSegment select_noise_segment(const AudioClip& noise, std::size_t length, std::uint64_t seed,
                                  std::string_view key) {
  if (noise.samples.empty()) throw Error(ErrorCode::EmptyNoise, "noise recording has no samples");
  const std::size_t n = noise.size();
  NoiseSegment seg;
  seg.offset = static_cast<std::size_t>(seeded_key_hash(seed, key) % n);
  seg.clip.sample_rate_hz = noise.sample_rate_hz;
  seg.clip.samples.resize(length);
  std::size_t src = seg.offset;
  for (std::size_t i = 0; i < length; ++i) {
    seg.clip.samples[i] = noise.samples[src];
    if (++src == n) src = 0;
  }
  return seg;
}

double signal_power(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "power of empty signal");
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

ScaledNoise scale_noise_to_snr(const AudioClip& clean, const AudioClip& noise, double snr_db) {
  if (clean.size() != noise.size()) {
    throw Error(ErrorCode::LengthMismatch, "clean and noise lengths differ");
  }
  const double p_clean = signal_power(clean);
  const double p_noise = signal_power(noise);
  if (p_clean <= 0.0) throw Error(ErrorCode::SilentInput, "clean signal has zero power");
  if (p_noise <= 0.0) throw Error(ErrorCode::SilentInput, "noise signal has zero power");

  ScaledNoise out;
  out.gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  out.noise.sample_rate_hz = noise.sample_rate_hz;
  out.noise.samples.resize(noise.size());
  for (std::size_t i = 0; i < noise.size(); ++i) out.noise.samples[i] = out.gain * noise.samples[i];
  return out;
}

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(signal_power(signal) / signal_power(noise));
}

std::vector<AudioClip> window(const AudioClip& clip, double window_s) {
  if (!(window_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "window length must be positive");
  const auto len = static_cast<std::size_t>(std::llround(window_s * clip.sample_rate_hz));
  if (len == 0) throw Error(ErrorCode::InvalidArgument, "window shorter than one sample");
  std::vector<AudioClip> windows;
  for (std::size_t start = 0; start + len <= clip.size(); start += len) {
    AudioClip w;
    w.sample_rate_hz = clip.sample_rate_hz;
    w.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace snrprobe
