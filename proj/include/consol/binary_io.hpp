#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace consol {

enum class DType { F32LE, F64LE };

std::string to_string(DType d);
DType parse_dtype(const std::string& s);
std::size_t dtype_size(DType d);

/// CRC-32C (Castagnoli) of a byte buffer.
std::uint32_t crc32c(std::span<const std::uint8_t> bytes);

/// Encodes doubles as raw little-endian values of the given dtype.
std::vector<std::uint8_t> encode_array(std::span<const double> values, DType dtype);
std::vector<std::uint8_t> encode_array(std::span<const float> values, DType dtype);

/// Decodes raw bytes; throws FormatError(field) when the length is not a whole
/// number of `count` elements.
std::vector<double> decode_array(std::span<const std::uint8_t> bytes, DType dtype, std::size_t count,
                                 const std::string& field);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace consol
