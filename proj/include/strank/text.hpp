#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace strank {

// Lowercases ASCII letters; bytes outside ASCII are passed through.
std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

// Collapses every run of whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Splits on whitespace runs; never returns empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

std::size_t count_whitespace_tokens(std::string_view s);

// FNV-1a over a byte range. Used for artifact checksums and seed derivation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace strank
