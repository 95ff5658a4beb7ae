#pragma once

#include <string>
#include <string_view>

namespace quill {

// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to
// U+FFFD, one replacement per offending byte.
std::u32string utf8_decode(std::string_view text);

std::string utf8_encode(std::u32string_view text);
void utf8_append(std::string& out, char32_t cp);

bool is_whitespace(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_letter(char32_t cp);

// Simple case mapping for ASCII and Latin-1; other code points map to
// themselves.
char32_t to_lower(char32_t cp);
char32_t to_upper(char32_t cp);

}  // namespace quill
