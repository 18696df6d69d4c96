#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mas2 {

/// Lowercases ASCII letters and splits on every byte that is not an ASCII
/// letter or digit. Bytes >= 0x80 count as word characters so UTF-8 words
/// such as "straße" survive as a single token.
std::vector<std::string> tokenize(std::string_view text);

/// Splits on runs of ASCII whitespace, dropping empty pieces.
std::vector<std::string_view> split_whitespace(std::string_view text);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Lowercase hex SHA-256 of the exact bytes of `data`.
std::string sha256_hex(std::string_view data);

} // namespace mas2
