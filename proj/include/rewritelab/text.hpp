// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rewritelab {

/// Decodes UTF-8 into code points. Throws ParseError on malformed input.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t symbol);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Escapes backslash and newline as `\\` and `\n` for one-record-per-line files.
std::string escape_line(std::string_view s);
/// Inverse of escape_line. Throws ProtocolError on raw control characters or
/// unknown escapes.
std::string unescape_line(std::string_view s);

}  // namespace rewritelab
