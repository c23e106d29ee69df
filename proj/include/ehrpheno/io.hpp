#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ehrpheno::io {

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

struct JsonLine {
    std::size_t line_number = 0;
    nlohmann::json value;
};

/// Parses one JSON object per non-blank line. Throws ValidationError naming
/// the file and line on malformed input.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<nlohmann::json>& records);

/// CSV field quoting (RFC 4180 style).
std::string csv_field(std::string_view s);

std::string format_double(double v, int precision = 6);

std::string sha256_hex(std::string_view bytes);

}  // namespace ehrpheno::io
