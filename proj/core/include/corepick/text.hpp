#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace corepick {

/// Decodes the UTF-8 sequence starting at `pos` and advances `pos` past it.
/// Malformed bytes decode as a single-byte unit with the byte value as the
/// code point, so iteration always makes progress and a later re-encode
/// reproduces the input byte-for-byte only when the input is valid UTF-8.
char32_t decode_utf8(std::string_view text, std::size_t& pos);

/// Byte length of the UTF-8 unit starting at `pos` (1..4).
std::size_t utf8_unit_length(std::string_view text, std::size_t pos);

/// Number of Unicode scalar values in `text`.
std::size_t codepoint_count(std::string_view text);

/// Word separators: Unicode whitespace plus ASCII punctuation.
bool is_word_separator(char32_t cp);

/// True when `text` contains a separator with a non-separator character both
/// before and after it. This is what makes a token span multiple words.
bool has_internal_separator(std::string_view text);

/// True when every code point in `text` is a word separator.
bool is_all_separators(std::string_view text);

/// FNV-1a 64-bit over raw bytes. Seedless and bit-exact across platforms.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::uint64_t state, std::string_view bytes);

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// splitmix64 finalizer; used to derive per-document noise streams.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace corepick
