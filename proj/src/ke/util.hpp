#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ke {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Collapses runs of whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Lowercase alphanumeric tokens, split on everything else.
std::vector<std::string> tokenize_words(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);

// Byte offsets of each UTF-8 codepoint start, plus a trailing entry for s.size().
// Invalid bytes are treated as single one-byte codepoints.
std::vector<size_t> utf8_codepoint_offsets(std::string_view s);

std::string sha256_hex(std::string_view data);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Write to a sibling temp file, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

int64_t unix_time_seconds();

}  // namespace ke
