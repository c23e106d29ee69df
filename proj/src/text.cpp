#include "ehrpheno/text.hpp"

#include <algorithm>
#include <cctype>

namespace ehrpheno::text {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) != 0;
}

static bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::size_t> find_bounded(std::string_view haystack, std::string_view needle) {
    std::vector<std::size_t> hits;
    if (needle.empty()) return hits;
    const bool check_front = is_word_char(needle.front());
    const bool check_back = is_word_char(needle.back());
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + 1)) {
        const auto end = pos + needle.size();
        if (check_front && pos > 0 && is_word_char(haystack[pos - 1])) continue;
        if (check_back && end < haystack.size() && is_word_char(haystack[end])) continue;
        hits.push_back(pos);
    }
    return hits;
}

bool contains_bounded(std::string_view haystack, std::string_view needle) {
    return !find_bounded(haystack, needle).empty();
}

bool keyword_matches(std::string_view lowered_haystack, std::string_view keyword) {
    const auto k = to_lower(keyword);
    if (k.find(' ') != std::string::npos) {
        return lowered_haystack.find(k) != std::string_view::npos;
    }
    return contains_bounded(lowered_haystack, k);
}

static bool is_terminator_at(std::string_view s, std::size_t i) {
    const char c = s[i];
    if (c == '\n') return true;
    if (c == '.' || c == '!' || c == '?') {
        return i + 1 == s.size() || is_space(s[i + 1]);
    }
    return false;
}

std::vector<Span> split_sentences(std::string_view s) {
    std::vector<Span> out;
    auto emit = [&](std::size_t begin, std::size_t end) {
        while (begin < end && is_space(s[begin])) ++begin;
        while (end > begin && is_space(s[end - 1])) --end;
        if (end > begin) out.push_back({begin, end - begin});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_terminator_at(s, i)) continue;
        emit(start, s[i] == '\n' ? i : i + 1);
        start = i + 1;
    }
    emit(start, s.size());
    return out;
}

std::vector<Span> sentence_pieces(std::string_view s) {
    std::vector<Span> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_terminator_at(s, i)) {
            ++i;
            continue;
        }
        ++i;
        while (i < s.size() && is_space(s[i])) ++i;
        out.push_back({start, i - start});
        start = i;
    }
    if (start < s.size()) out.push_back({start, s.size() - start});
    return out;
}

std::size_t count_words(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    return std::equal(prefix.begin(), prefix.end(), s.begin(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) ==
               std::tolower(static_cast<unsigned char>(b));
    });
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace ehrpheno::text
