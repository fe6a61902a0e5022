#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace e2v::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

/// Offset of the first byte that is not part of a well-formed UTF-8 sequence.
std::optional<std::size_t> find_invalid_utf8(std::string_view bytes);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Binary vector format: little-endian u32 dim, then dim IEEE-754 binary32.
std::string encode_vec(const Eigen::VectorXf& values);
Eigen::VectorXf decode_vec(std::string_view bytes);
void write_vec(const fs::path& path, const Eigen::VectorXf& values);
Eigen::VectorXf read_vec(const fs::path& path);

using CsvRow = std::vector<std::string>;

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated.
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
std::string format_csv_row(const CsvRow& row);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace e2v::io
