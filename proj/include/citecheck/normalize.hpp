#pragma once
// Title normalization, edit-distance similarity, threshold classification
// and ECDF-based threshold calibration.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citecheck/core.hpp"

namespace citecheck {

struct EmptyInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct MatchConfig {
    double threshold = 0.9;  // theta, in (0,1]
    bool strip_hyphens = true;
    bool fold_unicode = true;
};

struct SimilarityScore {
    double value = 0.0;  // in [0,1]
    BiblioRecord candidate;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

// Decodes one UTF-8 codepoint starting at pos; advances pos. Invalid bytes
// decode as U+FFFD and advance by one.
inline uint32_t decode_utf8(std::string_view s, size_t& pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    size_t len = 1;
    uint32_t cp = b0;
    if (b0 >= 0xF0) { len = 4; cp = b0 & 0x07u; }
    else if (b0 >= 0xE0) { len = 3; cp = b0 & 0x0Fu; }
    else if (b0 >= 0xC0) { len = 2; cp = b0 & 0x1Fu; }
    if (len == 1 && b0 >= 0x80) { pos += 1; return 0xFFFD; }
    if (pos + len > s.size()) { pos = s.size(); return 0xFFFD; }
    for (size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0u) != 0x80u) { pos += 1; return 0xFFFD; }
        cp = (cp << 6) | (b & 0x3Fu);
    }
    pos += len;
    return cp;
}

inline void encode_utf8(uint32_t cp, std::string& out) {
    if (cp < 0x80) out += static_cast<char>(cp);
    else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Compatibility fold for the Latin ranges common in bibliographic data:
// strips diacritics, expands ligatures, lowercases. Returns the ASCII
// replacement for a folded codepoint, or empty when the codepoint is not
// a foldable letter.
inline std::string fold_latin(uint32_t cp) {
    switch (cp) {
        case 0x00C6: case 0x00E6: return "ae";
        case 0x0152: case 0x0153: return "oe";
        case 0x00DF: return "ss";
        case 0x00D8: case 0x00F8: return "o";
        case 0x00D0: case 0x00F0: return "d";   // eth
        case 0x00DE: case 0x00FE: return "th";  // thorn
        case 0x0132: case 0x0133: return "ij";
        case 0xFB00: return "ff";
        case 0xFB01: return "fi";
        case 0xFB02: return "fl";
        case 0xFB03: return "ffi";
        case 0xFB04: return "ffl";
        default: break;
    }
    static constexpr struct { uint32_t lo, hi; char base; } kRanges[] = {
        // Latin-1 Supplement
        {0x00C0, 0x00C5, 'a'}, {0x00E0, 0x00E5, 'a'},
        {0x00C7, 0x00C7, 'c'}, {0x00E7, 0x00E7, 'c'},
        {0x00C8, 0x00CB, 'e'}, {0x00E8, 0x00EB, 'e'},
        {0x00CC, 0x00CF, 'i'}, {0x00EC, 0x00EF, 'i'},
        {0x00D1, 0x00D1, 'n'}, {0x00F1, 0x00F1, 'n'},
        {0x00D2, 0x00D6, 'o'}, {0x00F2, 0x00F6, 'o'},
        {0x00D9, 0x00DC, 'u'}, {0x00F9, 0x00FC, 'u'},
        {0x00DD, 0x00DD, 'y'}, {0x00FD, 0x00FD, 'y'}, {0x00FF, 0x00FF, 'y'},
        // Latin Extended-A
        {0x0100, 0x0105, 'a'}, {0x0106, 0x010D, 'c'}, {0x010E, 0x0111, 'd'},
        {0x0112, 0x011B, 'e'}, {0x011C, 0x0123, 'g'}, {0x0124, 0x0127, 'h'},
        {0x0128, 0x0131, 'i'}, {0x0134, 0x0135, 'j'}, {0x0136, 0x0138, 'k'},
        {0x0139, 0x0142, 'l'}, {0x0143, 0x014B, 'n'}, {0x014C, 0x0151, 'o'},
        {0x0154, 0x0159, 'r'}, {0x015A, 0x0161, 's'}, {0x0162, 0x0167, 't'},
        {0x0168, 0x0173, 'u'}, {0x0174, 0x0175, 'w'}, {0x0176, 0x0178, 'y'},
        {0x0179, 0x017E, 'z'}, {0x017F, 0x017F, 's'},
    };
    for (const auto& r : kRanges)
        if (cp >= r.lo && cp <= r.hi) return std::string(1, r.base);
    return {};
}

inline bool is_space_or_punct_cp(uint32_t cp) {
    if (cp < 0x80) {
        const char c = static_cast<char>(cp);
        return !( (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') );
    }
    // General punctuation, dashes, quotes, and the no-break space.
    if (cp == 0x00A0 || cp == 0x00B7 || cp == 0x00AB || cp == 0x00BB) return true;
    if (cp >= 0x2000 && cp <= 0x206F) return true;  // en/em dashes, curly quotes, ellipsis
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;
    if (cp == 0x3001 || cp == 0x3002) return true;  // CJK comma/period
    return false;
}

}  // namespace detail

/// Normalizes a title into the canonical key space: Unicode compatibility
/// fold, lowercase, diacritics stripped, punctuation and hyphens replaced
/// by spaces, whitespace collapsed, ends trimmed. Idempotent.
inline std::string normalize_title(std::string_view title) {
    std::string out;
    out.reserve(title.size());
    bool pending_space = false;
    size_t pos = 0;
    while (pos < title.size()) {
        const uint32_t cp = detail::decode_utf8(title, pos);
        if (detail::is_space_or_punct_cp(cp)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        std::string piece;
        if (cp < 0x80) {
            char c = static_cast<char>(cp);
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            piece = c;
        } else if (auto folded = detail::fold_latin(cp); !folded.empty()) {
            piece = std::move(folded);
        } else {
            detail::encode_utf8(cp, piece);  // non-Latin scripts pass through
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += piece;
    }
    return out;
}

/// Unit-cost Levenshtein edit distance.
inline int levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<int> row(b.size() + 1);
    std::iota(row.begin(), row.end(), 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            const int sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
        }
    }
    return row[b.size()];
}

/// Similarity of two normalized titles: 1 - d / max(|a|,|b|), 1 when both
/// empty. Inputs are expected to be normalize_title output.
inline double similarity(std::string_view a, std::string_view b) {
    const size_t m = std::max(a.size(), b.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(m);
}

/// Picks the best candidate (argmax by value, first-seen wins ties) and
/// classifies: Valid iff best strictly exceeds the threshold. An empty
/// candidate list classifies Invalid with no best.
inline std::pair<Verdict, std::optional<SimilarityScore>>
classify(const std::vector<SimilarityScore>& candidates, const MatchConfig& cfg) {
    std::optional<SimilarityScore> best;
    for (const auto& c : candidates)
        if (!best || c.value > best->value) best = c;
    Verdict v;
    v.status = (best && best->value > cfg.threshold) ? VerdictStatus::Valid
                                                     : VerdictStatus::Invalid;
    return {v, best};
}

/// Fraction of scores at or below x.
inline double ecdf_fraction_at_or_below(const std::vector<double>& scores, double x) {
    if (scores.empty()) throw EmptyInput("ecdf_fraction_at_or_below: empty scores");
    const auto n = std::count_if(scores.begin(), scores.end(),
                                 [x](double s) { return s <= x; });
    return static_cast<double>(n) / static_cast<double>(scores.size());
}

struct SweepRow {
    double theta;
    double frac_valid_at_or_below;
    double frac_invalid_at_or_below;
};

/// One ECDF row per grid point, over a labelled pair of score corpora.
inline std::vector<SweepRow> threshold_sweep(const std::vector<double>& valid_scores,
                                             const std::vector<double>& invalid_scores,
                                             const std::vector<double>& grid) {
    if (valid_scores.empty() || invalid_scores.empty())
        throw EmptyInput("threshold_sweep: empty score list");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double theta : grid)
        rows.push_back({theta, ecdf_fraction_at_or_below(valid_scores, theta),
                        ecdf_fraction_at_or_below(invalid_scores, theta)});
    return rows;
}

}  // namespace citecheck
