#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace tecfap {

using Words = std::vector<std::string>;

namespace detail {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Bytes >= 0x80 belong to UTF-8 sequences and are kept as word characters.
inline bool is_word_char(char c) {
    return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
}

inline bool is_article(std::string_view w) { return w == "the" || w == "a" || w == "an"; }

// Position of the first sentence terminator that ends a non-empty sentence.
// '.', '!' and '?' count only when followed by whitespace or end of text, so
// "3.1" survives; a line break always terminates.
inline std::size_t sentence_end(std::string_view s) {
    bool seen_word = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (is_word_char(c)) {
            seen_word = true;
            continue;
        }
        if (!seen_word) continue;
        if (c == '\n' || c == '\r') return i;
        if (c == '.' || c == '!' || c == '?') {
            if (i + 1 == s.size() || is_space(s[i + 1])) return i;
        }
    }
    return s.size();
}

}  // namespace detail

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// Canonical word sequence of a model completion or an entity name.
///
/// Lowercases, cuts at the first sentence terminator, turns every ASCII
/// punctuation or special character into a word break (apostrophes are
/// deleted so "pepper's" stays one word) and drops a single leading article.
/// The article is only dropped when it is followed by a non-article word,
/// which keeps the function idempotent on inputs such as "the the".
inline Words normalize_output(std::string_view raw) {
    const std::string lowered = to_lower_ascii(raw.substr(0, detail::sentence_end(raw)));

    Words words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    for (char c : lowered) {
        if (detail::is_word_char(c)) {
            current.push_back(c);
        } else if (c == '\'' || c == '`') {
            // apostrophes join: "linkin's" -> "linkins"
        } else {
            flush();
        }
    }
    flush();

    if (words.size() >= 2 && detail::is_article(words[0]) && !detail::is_article(words[1])) {
        words.erase(words.begin());
    }
    return words;
}

inline std::string join_words(const Words& words, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

// Single-string normalized form, used for candidate sets and name matching.
inline std::string normalized_name(std::string_view raw) { return join_words(normalize_output(raw)); }

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// Shortest round-trip decimal form; identical bytes on every run.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), ptr);
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace tecfap
