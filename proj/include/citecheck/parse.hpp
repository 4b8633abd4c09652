#pragma once
// Heuristic reference-string parsing, non-academic pre-filtering, and the
// line-oriented reference input format.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "citecheck/core.hpp"
#include "citecheck/normalize.hpp"

namespace citecheck {

struct ParseFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExtractionDocument {
    std::string doc_id;
    std::vector<RawReference> references;  // ref_index ascending
};

struct ReparseRequest {
    RawReference raw;
    std::string schema_version = "1";
};

namespace detail {

inline bool plausible_year(int y) { return y >= 1800 && y <= 2100; }

// Last plausible 4-digit year in the string.
inline std::optional<int> find_year(const std::string& s) {
    static const std::regex re(R"((?:^|[^0-9])((18|19|20)\d\d)(?:[^0-9]|$))");
    std::optional<int> year;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re);
         it != std::sregex_iterator(); ++it) {
        const int y = std::stoi((*it)[1].str());
        if (plausible_year(y)) year = y;
    }
    return year;
}

inline std::optional<std::string> find_url(const std::string& s) {
    static const std::regex re(R"((https?://[^\s,]+))");
    std::smatch m;
    if (std::regex_search(s, m, re)) {
        std::string u = m[1].str();
        while (!u.empty() && (u.back() == '.' || u.back() == ')' || u.back() == ';'))
            u.pop_back();
        return u;
    }
    return std::nullopt;
}

inline std::optional<std::string> find_doi(const std::string& s) {
    static const std::regex re(R"((10\.\d{4,9}/[-._;()/:A-Za-z0-9]+))");
    std::smatch m;
    if (std::regex_search(s, m, re)) {
        std::string d = m[1].str();
        while (!d.empty() && (d.back() == '.' || d.back() == ';')) d.pop_back();
        return d;
    }
    return std::nullopt;
}

// Strips a leading "[4]", "[Smith, 2020]", "(12)" or "7." index marker.
inline std::string strip_marker(std::string s) {
    s = trim(s);
    static const std::regex bracket(R"(^[\[(][^\])]{0,40}[\])][.:]?\s*)");
    static const std::regex number(R"(^\d{1,3}\.\s+)");
    std::smatch m;
    if (std::regex_search(s, m, bracket)) return s.substr(m[0].length());
    if (std::regex_search(s, m, number)) return s.substr(m[0].length());
    return s;
}

// Splits on ". " boundaries that are not author initials ("J. Smith") or
// common abbreviations.
inline std::vector<std::string> split_segments(const std::string& s) {
    std::vector<std::string> segs;
    std::string cur;
    for (size_t i = 0; i < s.size(); ++i) {
        cur += s[i];
        if (s[i] == '.' && i + 1 < s.size() && std::isspace(static_cast<unsigned char>(s[i + 1]))) {
            // look back: single capital letter or known abbreviation keeps the segment open
            size_t k = cur.size() >= 2 ? cur.size() - 2 : 0;
            size_t start = k;
            while (start > 0 && !std::isspace(static_cast<unsigned char>(cur[start - 1]))) --start;
            const std::string word = cur.substr(start, cur.size() - 1 - start);
            static const std::vector<std::string> kAbbrev = {
                "al", "eds", "ed", "vol", "no", "pp", "proc", "conf", "univ", "dept", "st"};
            const bool initial = word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]));
            std::string lower = word;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            const bool abbrev = std::find(kAbbrev.begin(), kAbbrev.end(), lower) != kAbbrev.end();
            if (!initial && !abbrev) {
                const std::string seg = trim(std::string_view(cur).substr(0, cur.size() - 1));
                if (!seg.empty()) segs.push_back(seg);
                cur.clear();
            }
        }
    }
    const std::string seg = trim(cur);
    if (!seg.empty()) {
        // drop a trailing period
        std::string t = seg;
        if (!t.empty() && t.back() == '.') t.pop_back();
        t = trim(t);
        if (!t.empty()) segs.push_back(t);
    }
    return segs;
}

inline bool looks_like_name_word(const std::string& w) {
    if (w.empty()) return false;
    static const std::vector<std::string> kParticles = {"van", "de", "der", "von", "del",
                                                        "da",  "la", "le",  "el",  "al"};
    if (std::find(kParticles.begin(), kParticles.end(), w) != kParticles.end()) return true;
    if (!std::isupper(static_cast<unsigned char>(w[0])) &&
        !(static_cast<unsigned char>(w[0]) >= 0x80))
        return false;
    return true;
}

// An author segment is a comma/"and"-separated list of short capitalized
// name pieces, with no digits and no colon.
inline bool is_author_segment(const std::string& seg) {
    if (seg.find(':') != std::string::npos) return false;
    if (std::any_of(seg.begin(), seg.end(),
                    [](unsigned char c) { return std::isdigit(c); }))
        return false;
    static const std::regex split_re(R"(\s*(?:,|;| and | And )\s*)");
    std::sregex_token_iterator it(seg.begin(), seg.end(), split_re, -1), end;
    int pieces = 0;
    for (; it != end; ++it) {
        const std::string piece = trim(it->str());
        if (piece.empty()) continue;
        ++pieces;
        std::istringstream ws(piece);
        std::string w;
        int nwords = 0;
        while (ws >> w) {
            ++nwords;
            // strip a trailing period from initials
            if (!w.empty() && w.back() == '.') w.pop_back();
            if (w == "et" || w == "al" || w == "others") continue;
            if (!looks_like_name_word(w)) return false;
        }
        if (nwords == 0 || nwords > 4) return false;
    }
    return pieces > 0;
}

inline std::vector<std::string> split_authors(const std::string& seg) {
    static const std::regex split_re(R"(\s*(?:,|;| and | And )\s*)");
    std::vector<std::string> out;
    std::sregex_token_iterator it(seg.begin(), seg.end(), split_re, -1), end;
    for (; it != end; ++it) {
        std::string piece = trim(it->str());
        if (piece.empty() || piece == "et al" || piece == "et al." || piece == "others")
            continue;
        out.push_back(std::move(piece));
    }
    return out;
}

inline bool has_letter(const std::string& s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalpha(c) || c >= 0x80;
    });
}

// Venue segments start with "In ..." or name a publication series.
inline bool is_venue_segment(const std::string& seg) {
    static const std::regex in_re(R"(^In\s+)");
    if (std::regex_search(seg, in_re)) return true;
    static const std::regex kw(
        R"(Journal|Proceedings|Conference|Symposium|Transactions|Workshop|arXiv|Press|Magazine|Letters|Review)",
        std::regex::icase);
    return std::regex_search(seg, kw);
}

inline std::string clean_venue(std::string seg) {
    static const std::regex in_re(R"(^In\s+)");
    seg = std::regex_replace(seg, in_re, "");
    // drop trailing ", 2023", page ranges and volume noise after the last comma
    static const std::regex tail(R"(,\s*(?:(?:18|19|20)\d\d|pages?\s.*|pp\..*|vol\..*|\d+(?:\(\d+\))?(?::\d+(?:[-–]\d+)?)?)\s*$)");
    std::string prev;
    while (prev != seg) {
        prev = seg;
        seg = std::regex_replace(seg, tail, "");
    }
    return trim(seg);
}

}  // namespace detail

/// Best-effort heuristic parse of a raw reference string. Missing fields
/// stay absent. Throws ParseFailureError when no title-like segment can be
/// isolated.
inline ParsedReference parse_reference(const RawReference& raw) {
    const std::string body = detail::strip_marker(raw.text);
    if (body.empty()) throw ParseFailureError("empty reference text");

    ParsedReference out;
    out.year = detail::find_year(body);
    out.url = detail::find_url(body);
    out.doi = detail::find_doi(body);

    // Quoted title takes precedence over segment heuristics.
    std::string rest = body;
    static const std::regex quoted(R"(["“]([^"”]{4,})["”])");
    std::smatch qm;
    if (std::regex_search(body, qm, quoted)) {
        out.title = detail::trim(qm[1].str());
        if (!out.title->empty() && out.title->back() == '.') out.title->pop_back();
        rest = qm.prefix().str();
    }

    auto segments = detail::split_segments(body);
    size_t seg_pos = 0;
    if (!segments.empty() && detail::is_author_segment(segments[0])) {
        out.authors = detail::split_authors(segments[0]);
        seg_pos = 1;
    }
    if (!out.title) {
        for (size_t i = seg_pos; i < segments.size(); ++i) {
            const auto& seg = segments[i];
            if (!detail::has_letter(seg)) continue;
            if (detail::is_venue_segment(seg) && i > seg_pos) continue;
            if (seg.rfind("http", 0) == 0) continue;
            // a title needs some substance
            if (normalize_title(seg).size() < 3) continue;
            out.title = seg;
            seg_pos = i + 1;
            break;
        }
    }
    for (size_t i = seg_pos; i < segments.size(); ++i) {
        if (detail::is_venue_segment(segments[i])) {
            const std::string v = detail::clean_venue(segments[i]);
            if (!v.empty()) out.venue = v;
            break;
        }
    }
    if (out.venue) {
        static const std::regex thesis_re(R"(thesis|dissertation)", std::regex::icase);
        if (std::regex_search(*out.venue, thesis_re)) out.reference_type = ReferenceType::Thesis;
        else out.reference_type = ReferenceType::Article;
    }

    if (!out.title || normalize_title(*out.title).empty())
        throw ParseFailureError("no title-like segment in: " + raw.text);
    return out;
}

/// True when the reference is URL-dominant: a URL is present and the
/// title/venue/year triple is incomplete. Such references bypass
/// verification with a NonAcademic verdict.
inline bool detect_non_academic(const ParsedReference& ref, const RawReference&) {
    if (!ref.url) return false;
    return !(ref.title && ref.venue && ref.year);
}

/// Reads the line-oriented input format: UTF-8, one raw reference per
/// line, '#' lines and blank lines ignored.
inline std::vector<RawReference> read_reference_lines(std::istream& in,
                                                      const std::string& paper_id) {
    std::vector<RawReference> refs;
    std::string line;
    int index = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        refs.push_back(RawReference{t, paper_id, index++});
    }
    return refs;
}

inline std::vector<RawReference> read_reference_file(const std::string& path,
                                                     const std::string& paper_id) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference file: " + path);
    return read_reference_lines(in, paper_id);
}

}  // namespace citecheck
