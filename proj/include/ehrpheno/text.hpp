#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ehrpheno::text {

std::string to_lower(std::string_view s);

/// ASCII alphanumerics and any non-ASCII byte count as word characters.
bool is_word_char(char c);

std::string_view trim(std::string_view s);

/// Offsets of `needle` in `haystack` that are not glued to neighbouring word
/// characters. Both arguments must already be lower-cased.
std::vector<std::size_t> find_bounded(std::string_view haystack, std::string_view needle);

bool contains_bounded(std::string_view haystack, std::string_view needle);

/// Keyword test used for sentence selection. Single words match on word
/// boundaries ("mi" does not hit "family"); phrases containing a space match
/// as contiguous substrings. Case-insensitive; `lowered_haystack` must be
/// lower-cased.
bool keyword_matches(std::string_view lowered_haystack, std::string_view keyword);

struct Span {
    std::size_t offset = 0;
    std::size_t length = 0;

    bool operator==(const Span&) const = default;
};

/// Sentences as trimmed spans. A sentence ends at '.', '!' or '?' when the
/// next character is whitespace or end of text, and at every newline.
std::vector<Span> split_sentences(std::string_view s);

/// Partition of `s` into consecutive pieces, one per sentence, each piece
/// carrying the whitespace that follows it. Concatenating the pieces gives
/// back `s` exactly.
std::vector<Span> sentence_pieces(std::string_view s);

std::size_t count_words(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace ehrpheno::text
