#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lores {

std::string trim(std::string_view s);

// Split on runs of ASCII whitespace; no empty tokens.
std::vector<std::string> split_ws(std::string_view s);

std::vector<std::string> split_char(std::string_view s, char sep);

std::string join(const std::vector<std::string>& tokens, std::string_view sep);

// Structural UTF-8 validation (RFC 3629: no overlongs, no surrogates,
// max U+10FFFF).
bool utf8_valid(std::string_view s);

// Split a UTF-8 string into single code points (caller guarantees validity).
std::vector<std::string> utf8_chars(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

// Reads a whole file; fails with IoError if missing/unreadable.
std::string read_file(const std::string& path);

// Splits file content into lines; a trailing '\n' does not create an
// empty final line. '\r' is treated as ordinary content.
std::vector<std::string> read_lines(const std::string& path);

void write_file(const std::string& path, std::string_view content);

}  // namespace lores
