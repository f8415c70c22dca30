#include "sapp/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sapp/error.hpp"

namespace sapp {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::uint32_t checked_dim(std::size_t d, const char* name) {
  if (d > 0xFFFFFFFFull) throw std::invalid_argument(fmt::format("{} too large for SAPP", name));
  return static_cast<std::uint32_t>(d);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const FeatureTensor& x) {
  std::vector<std::uint8_t> out;
  out.reserve(kSappHeaderBytes + 4 * x.size());
  for (char c : {'S', 'A', 'P', 'P'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kSappVersion);
  put_u32(out, checked_dim(x.channels(), "C"));
  put_u32(out, checked_dim(x.frames(), "T"));
  put_u32(out, checked_dim(x.bins(), "F"));
  put_u32(out, kSappDtypeF32);
  for (float v : x.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSappHeaderBytes) {
    throw FormatError(fmt::format("SAPP header truncated at offset {}", bytes.size()));
  }
  if (std::memcmp(bytes.data(), "SAPP", 4) != 0) {
    throw FormatError("bad SAPP magic at offset 0");
  }
  if (const auto version = get_u32(bytes, 4); version != kSappVersion) {
    throw FormatError(fmt::format("unsupported SAPP version {} at offset 4", version));
  }
  const Shape shape{get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
  for (std::size_t i = 0; i < 3; ++i) {
    if (get_u32(bytes, 8 + 4 * i) == 0) {
      throw FormatError(fmt::format("zero dimension at offset {}", 8 + 4 * i));
    }
  }
  if (const auto dtype = get_u32(bytes, 20); dtype != kSappDtypeF32) {
    throw FormatError(fmt::format("dtype {} is not float32 at offset 20", dtype));
  }
  const std::size_t expected = kSappHeaderBytes + 4 * shape.size();
  if (bytes.size() < expected) {
    throw FormatError(fmt::format("SAPP payload truncated at offset {} (expected {} bytes)",
                                  bytes.size(), expected));
  }
  if (bytes.size() > expected) {
    throw FormatError(fmt::format("trailing bytes after SAPP payload at offset {}", expected));
  }
  std::vector<float> data(shape.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kSappHeaderBytes + 4 * i));
  }
  return FeatureTensor(shape, std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void tensor_write(const std::filesystem::path& path, const FeatureTensor& x) {
  const auto bytes = encode_tensor(x);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

FeatureTensor tensor_read(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace sapp
