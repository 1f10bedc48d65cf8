#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cdmp {

// Little-endian primitives shared by the checkpoint and window-cache formats.

void write_u16_le(std::ostream& out, std::uint16_t value);
void write_u32_le(std::ostream& out, std::uint32_t value);
void write_f32_le(std::ostream& out, std::span<const float> values);

std::uint16_t read_u16_le(std::istream& in);
std::uint32_t read_u32_le(std::istream& in);
std::vector<float> read_f32_le(std::istream& in, std::size_t count);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Hex SHA-256 of a string.
std::string sha256_hex(std::string_view bytes);

/// Writes `text` to a sibling temporary file, then renames it into place.
/// Parent directories are created.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Whole file as a string; throws naming the path when it cannot be read.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cdmp
