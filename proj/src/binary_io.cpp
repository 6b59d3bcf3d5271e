#include "consol/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <boost/crc.hpp>

#include "consol/errors.hpp"

namespace consol {

static_assert(std::endian::native == std::endian::little, "raw array I/O assumes a little-endian host");

std::string to_string(DType d) { return d == DType::F32LE ? "f32le" : "f64le"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32le") return DType::F32LE;
  if (s == "f64le") return DType::F64LE;
  throw FormatError("dtype", "unsupported array dtype '" + s + "'");
}

std::size_t dtype_size(DType d) { return d == DType::F32LE ? 4 : 8; }

std::uint32_t crc32c(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace {

template <typename T>
std::vector<std::uint8_t> encode(std::span<const T> values, DType dtype) {
  std::vector<std::uint8_t> out(values.size() * dtype_size(dtype));
  std::uint8_t* dst = out.data();
  for (T v : values) {
    if (dtype == DType::F32LE) {
      const float f = static_cast<float>(v);
      std::memcpy(dst, &f, 4);
      dst += 4;
    } else {
      const double d = static_cast<double>(v);
      std::memcpy(dst, &d, 8);
      dst += 8;
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_array(std::span<const double> values, DType dtype) {
  return encode(values, dtype);
}

std::vector<std::uint8_t> encode_array(std::span<const float> values, DType dtype) {
  return encode(values, dtype);
}

std::vector<double> decode_array(std::span<const std::uint8_t> bytes, DType dtype, std::size_t count,
                                 const std::string& field) {
  const std::size_t width = dtype_size(dtype);
  if (bytes.size() != count * width) {
    throw FormatError(field, "payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                 std::to_string(count * width) + " (" + std::to_string(count) +
                                 " x " + to_string(dtype) + ")");
  }
  std::vector<double> out(count);
  const std::uint8_t* src = bytes.data();
  for (std::size_t i = 0; i < count; ++i, src += width) {
    if (dtype == DType::F32LE) {
      float f;
      std::memcpy(&f, src, 4);
      out[i] = f;
    } else {
      std::memcpy(&out[i], src, 8);
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace consol
