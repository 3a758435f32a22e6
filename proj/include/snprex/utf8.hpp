#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Mention offsets are counted in Unicode code points, not bytes. These helpers
// convert between the two over UTF-8 text.
namespace snprex::utf8 {

bool is_valid(std::string_view text);

/// Number of code points. Invalid bytes count as one code point each.
std::size_t length(std::string_view text);

/// Byte offset of every code point boundary: result[i] is the byte index where
/// code point i starts, and result.back() == text.size().
std::vector<std::size_t> boundaries(std::string_view text);

/// Slice by code point indices; nullopt when the range is out of bounds.
std::optional<std::string> substr(std::string_view text, std::size_t cp_begin, std::size_t cp_end);

/// Decodes one code point starting at byte `pos`, advancing `pos`.
/// Invalid sequences yield U+FFFD and advance by one byte.
char32_t decode(std::string_view text, std::size_t& pos);

void append(std::string& out, char32_t cp);

}  // namespace snprex::utf8
