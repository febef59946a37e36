#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "vocalbeat/binary_io.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

enum class SampleFormat { kPcm16, kPcm24, kPcm32, kFloat32 };

namespace wav_detail {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint16_t read_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float decode_sample(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    std::uint32_t u = read_u32(p);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
  }
  switch (bits) {
    case 16:
      return static_cast<float>(static_cast<std::int16_t>(read_u16(p)) / 32768.0);
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<float>(v / 8388608.0);
    }
    default:
      return static_cast<float>(static_cast<std::int32_t>(read_u32(p)) / 2147483648.0);
  }
}

}  // namespace wav_detail

// Reads a RIFF/WAVE file (16/24/32-bit PCM or 32-bit float, mono or
// stereo) and returns the mono mixdown with samples scaled to [-1, 1].
inline Waveform load_audio(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file: " + path);
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (file.size() < 12 || std::memcmp(file.data(), "RIFF", 4) != 0 || std::memcmp(file.data() + 8, "WAVE", 4) != 0)
    throw UnsupportedFormat("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= file.size()) {
    const unsigned char* chunk = file.data() + pos;
    std::uint32_t size = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t available = file.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) throw UnsupportedFormat("malformed fmt chunk: " + path);
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      block_align = read_u16(chunk + 20);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40 || available < 40) throw UnsupportedFormat("malformed extensible fmt chunk: " + path);
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, available);
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0) throw UnsupportedFormat("missing fmt chunk: " + path);
  if (!data) throw UnsupportedFormat("missing data chunk: " + path);
  if (channels != 1 && channels != 2) throw UnsupportedFormat("only mono or stereo audio is supported: " + path);
  bool ok = (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32)) ||
            (format == kFormatFloat && bits == 32);
  if (!ok)
    throw UnsupportedFormat("unsupported sample encoding (format " + std::to_string(format) + ", " +
                            std::to_string(bits) + " bits): " + path);
  std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels) throw UnsupportedFormat("inconsistent block alignment: " + path);
  if (rate == 0) throw UnsupportedFormat("zero sample rate: " + path);

  std::size_t frames = data_size / block_align;
  if (frames == 0) throw DegenerateInput("audio file has no samples: " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* frame = data + i * block_align;
    if (channels == 1) {
      w.samples[i] = decode_sample(frame, format, bits);
    } else {
      double left = decode_sample(frame, format, bits);
      double right = decode_sample(frame + bytes_per_sample, format, bits);
      w.samples[i] = static_cast<float>(0.5 * (left + right));
    }
  }
  w.validate();
  return w;
}

// Writes interleaved channels. All channels must have equal length.
inline void write_wav(const std::string& path, const std::vector<std::vector<float>>& channels, int sample_rate,
                      SampleFormat fmt = SampleFormat::kFloat32) {
  if (channels.empty()) throw InvalidArgument("write_wav: no channels");
  if (sample_rate <= 0) throw InvalidArgument("write_wav: sample rate must be positive");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw InvalidArgument("write_wav: channel lengths differ");

  const std::uint16_t n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = fmt == SampleFormat::kPcm16 ? 16 : fmt == SampleFormat::kPcm24 ? 24 : 32;
  const std::uint16_t tag = fmt == SampleFormat::kFloat32 ? wav_detail::kFormatFloat : wav_detail::kFormatPcm;
  const std::uint16_t block = static_cast<std::uint16_t>(n_ch * bits / 8);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * block);

  binary::Writer out(path);
  out.bytes("RIFF", 4);
  out.put<std::uint32_t>(36 + data_bytes + (data_bytes & 1u));
  out.bytes("WAVE", 4);
  out.bytes("fmt ", 4);
  out.put<std::uint32_t>(16);
  out.put<std::uint16_t>(tag);
  out.put<std::uint16_t>(n_ch);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sample_rate));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sample_rate) * block);
  out.put<std::uint16_t>(block);
  out.put<std::uint16_t>(bits);
  out.bytes("data", 4);
  out.put<std::uint32_t>(data_bytes);

  std::vector<unsigned char> buf(data_bytes);
  unsigned char* p = buf.data();
  auto quantize = [](float s, double scale, double lo, double hi) {
    return static_cast<std::int64_t>(std::clamp(std::lround(static_cast<double>(s) * scale), static_cast<long>(lo),
                                                static_cast<long>(hi)));
  };
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& c : channels) {
      float s = c[i];
      switch (fmt) {
        case SampleFormat::kPcm16: {
          auto v = static_cast<std::uint16_t>(quantize(s, 32768.0, -32768, 32767));
          *p++ = v & 0xFF;
          *p++ = v >> 8;
          break;
        }
        case SampleFormat::kPcm24: {
          auto v = static_cast<std::uint32_t>(quantize(s, 8388608.0, -8388608, 8388607));
          *p++ = v & 0xFF;
          *p++ = (v >> 8) & 0xFF;
          *p++ = (v >> 16) & 0xFF;
          break;
        }
        case SampleFormat::kPcm32: {
          auto v = static_cast<std::uint32_t>(quantize(s, 2147483648.0, -2147483648.0, 2147483647.0));
          for (int b = 0; b < 4; ++b) *p++ = (v >> (8 * b)) & 0xFF;
          break;
        }
        case SampleFormat::kFloat32: {
          std::uint32_t u;
          std::memcpy(&u, &s, sizeof u);
          for (int b = 0; b < 4; ++b) *p++ = (u >> (8 * b)) & 0xFF;
          break;
        }
      }
    }
  }
  out.bytes(buf.data(), buf.size());
  if (data_bytes & 1u) out.put<std::uint8_t>(0);
  out.close();
}

inline void write_wav(const std::string& path, const Waveform& w, SampleFormat fmt = SampleFormat::kFloat32) {
  write_wav(path, std::vector<std::vector<float>>{w.samples}, w.sample_rate, fmt);
}

}  // namespace vocalbeat
