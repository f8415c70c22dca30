#include "sapp/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "sapp/error.hpp"
#include "sapp/tensor_io.hpp"

namespace sapp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t u16_at(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

Audio read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const auto name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(fmt::format("{}: not a RIFF/WAVE file at offset 0", name));
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t size = u32_at(bytes, off + 4);
    const std::size_t body = off + 8;
    if (body + size > bytes.size()) {
      throw FormatError(fmt::format("{}: chunk truncated at offset {}", name, off));
    }
    if (std::memcmp(bytes.data() + off, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(fmt::format("{}: short fmt chunk at offset {}", name, off));
      format = u16_at(bytes, body);
      channels = u16_at(bytes, body + 2);
      rate = u32_at(bytes, body + 4);
      bits = u16_at(bytes, body + 14);
      if (format == kFormatExtensible && size >= 26) format = u16_at(bytes, body + 24);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + off, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(fmt::format("{}: data before fmt at offset {}", name, off));
      if (channels != 1) {
        throw FormatError(fmt::format("{}: {} channels, only mono is supported", name, channels));
      }
      Audio audio;
      audio.sample_rate = rate;
      if (format == kFormatPcm && bits == 16) {
        audio.samples.resize(size / 2);
        for (std::size_t i = 0; i < audio.samples.size(); ++i) {
          const auto v = static_cast<std::int16_t>(u16_at(bytes, body + 2 * i));
          audio.samples[i] = static_cast<float>(v) / 32768.0f;
        }
      } else if (format == kFormatFloat && bits == 32) {
        audio.samples.resize(size / 4);
        for (std::size_t i = 0; i < audio.samples.size(); ++i) {
          audio.samples[i] = std::bit_cast<float>(u32_at(bytes, body + 4 * i));
        }
      } else {
        throw FormatError(fmt::format("{}: unsupported encoding (format {}, {} bits)", name,
                                      format, bits));
      }
      return audio;
    }
    off = body + size + (size & 1);
  }
  throw FormatError(fmt::format("{}: no data chunk before offset {}", name, bytes.size()));
}

void write_wav(const std::filesystem::path& path, const Audio& audio, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * block);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, audio.sample_rate);
  put_u32(out, audio.sample_rate * block);
  put_u16(out, block);
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : audio.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const float clipped = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
      const auto v = static_cast<std::int16_t>(std::lround(clipped * 32768.0f));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace sapp
