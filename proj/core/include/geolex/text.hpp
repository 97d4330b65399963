#pragma once

// UTF-8 helpers shared by the tokenizer, location-field matching and
// first-name extraction.

#include <string>
#include <string_view>
#include <vector>

namespace geolex::text {

/// Decodes UTF-8; each invalid byte becomes U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

bool is_space(char32_t c) noexcept;
/// Unicode punctuation (P* categories) over the ranges social-media text uses:
/// ASCII, Latin-1, General Punctuation and CJK brackets. Symbols such as
/// '$', '+', '<' and emoji are not punctuation.
bool is_punct(char32_t c) noexcept;
/// Simple one-to-one lowercase mapping for ASCII, Latin-1, Latin Extended-A,
/// Greek and Cyrillic. Idempotent.
char32_t to_lower(char32_t c) noexcept;

std::string lowercase(std::string_view s);
std::string trim(std::string_view s);
/// Trims and replaces every run of whitespace with one ASCII space.
std::string collapse_whitespace(std::string_view s);
/// Splits on Unicode whitespace; no empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);
/// Removes trailing punctuation code points.
std::string strip_trailing_punct(std::string_view s);

/// Normalized first token of a display name ("Jane Doe" -> "jane"). Empty when
/// the name has no letters left after stripping punctuation.
std::string first_name(std::string_view display_name);

}  // namespace geolex::text
