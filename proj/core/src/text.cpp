#include "corepick/text.hpp"

namespace corepick {

namespace {

inline bool is_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

}  // namespace

char32_t decode_utf8(std::string_view text, std::size_t& pos) {
    const unsigned char b0 = static_cast<unsigned char>(text[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && pos + 1 < text.size() &&
        is_continuation(static_cast<unsigned char>(text[pos + 1]))) {
        char32_t cp = (b0 & 0x1Fu) << 6 |
                      (static_cast<unsigned char>(text[pos + 1]) & 0x3Fu);
        pos += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && pos + 2 < text.size() &&
        is_continuation(static_cast<unsigned char>(text[pos + 1])) &&
        is_continuation(static_cast<unsigned char>(text[pos + 2]))) {
        char32_t cp = (b0 & 0x0Fu) << 12 |
                      (static_cast<unsigned char>(text[pos + 1]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(text[pos + 2]) & 0x3Fu);
        pos += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && pos + 3 < text.size() &&
        is_continuation(static_cast<unsigned char>(text[pos + 1])) &&
        is_continuation(static_cast<unsigned char>(text[pos + 2])) &&
        is_continuation(static_cast<unsigned char>(text[pos + 3]))) {
        char32_t cp = (b0 & 0x07u) << 18 |
                      (static_cast<unsigned char>(text[pos + 1]) & 0x3Fu) << 12 |
                      (static_cast<unsigned char>(text[pos + 2]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(text[pos + 3]) & 0x3Fu);
        pos += 4;
        return cp;
    }
    // Malformed lead byte: consume one byte.
    ++pos;
    return b0;
}

std::size_t utf8_unit_length(std::string_view text, std::size_t pos) {
    std::size_t p = pos;
    decode_utf8(text, p);
    return p - pos;
}

std::size_t codepoint_count(std::string_view text) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        decode_utf8(text, pos);
        ++n;
    }
    return n;
}

bool is_word_separator(char32_t cp) {
    // ASCII punctuation blocks.
    if ((cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
        (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E)) {
        return true;
    }
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0:
        case 0x1680:
        case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
        case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
        case 0x200A:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F:
        case 0x3000:
            return true;
        default:
            return false;
    }
}

bool has_internal_separator(std::string_view text) {
    bool seen_word_char = false;
    bool pending_separator = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = decode_utf8(text, pos);
        if (is_word_separator(cp)) {
            if (seen_word_char) pending_separator = true;
        } else {
            if (pending_separator) return true;
            seen_word_char = true;
        }
    }
    return false;
}

bool is_all_separators(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!is_word_separator(decode_utf8(text, pos))) return false;
    }
    return true;
}

std::uint64_t fnv1a64(std::uint64_t state, std::string_view bytes) {
    for (unsigned char b : bytes) {
        state ^= b;
        state *= kFnvPrime;
    }
    return state;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    return fnv1a64(kFnvOffsetBasis, bytes);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace corepick
