#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sapp/tensor.hpp"

namespace sapp {

// SAPP binary tensor file, all fields little-endian:
//
//   offset  size  field
//        0     4  magic "SAPP"
//        4     4  version (u32, currently 1)
//        8     4  C (u32)
//       12     4  T (u32)
//       16     4  F (u32)
//       20     4  dtype (u32, 1 = IEEE-754 binary32)
//       24   4*N  payload, row-major (C, T, F)
inline constexpr std::uint32_t kSappVersion = 1;
inline constexpr std::uint32_t kSappDtypeF32 = 1;
inline constexpr std::size_t kSappHeaderBytes = 24;

std::vector<std::uint8_t> encode_tensor(const FeatureTensor& x);
FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes);

void tensor_write(const std::filesystem::path& path, const FeatureTensor& x);
FeatureTensor tensor_read(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace sapp
