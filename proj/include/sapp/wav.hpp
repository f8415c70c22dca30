#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sapp {

/// Mono audio with samples scaled to [-1, 1].
struct Audio {
  std::uint32_t sample_rate = 0;
  std::vector<float> samples;
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono RIFF/WAVE file, 16-bit PCM or 32-bit IEEE float
/// (WAVE_FORMAT_EXTENSIBLE is accepted for both).
Audio read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Audio& audio,
               WavEncoding encoding = WavEncoding::kPcm16);

}  // namespace sapp
