#pragma once
// RFC-4180 CSV export of verification results and the inverse parser used
// by the report commands.

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "citecheck/core.hpp"

namespace citecheck {

struct CsvError : std::runtime_error {
    size_t row;
    CsvError(const std::string& what, size_t row_number)
        : std::runtime_error(what + " (row " + std::to_string(row_number) + ")"),
          row(row_number) {}
};

inline constexpr const char* kCsvHeader =
    "paper_id,ref_index,raw_text,parsed_title,parsed_authors,parsed_year,parsed_venue,"
    "status,invalid_kind,diagnosing_strategy,best_similarity,matched_title,"
    "matched_authors,matched_year,matched_venue,notes";
inline constexpr int kCsvColumns = 16;

namespace detail {

inline bool needs_quoting(const std::string& f) {
    return f.find_first_of(",\"\r\n") != std::string::npos;
}

inline std::string csv_field(const std::string& f) {
    if (!needs_quoting(f)) return f;
    std::string out = "\"";
    for (const char c : f) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string format_similarity(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Reads one CSV record (possibly spanning lines inside quotes). Returns
// false on clean EOF.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            size_t row_number) {
    fields.clear();
    if (in.peek() == EOF) return false;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    while (true) {
        const int ci = in.get();
        if (ci == EOF) {
            if (in_quotes) throw CsvError("unterminated quoted field", row_number);
            if (!any && field.empty() && fields.empty()) return false;
            fields.push_back(std::move(field));
            return true;
        }
        const char c = static_cast<char>(ci);
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) in_quotes = true;
        else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (c == '\r') {
            // swallow; the \n follows
        } else {
            field += c;
        }
    }
}

inline Strategy strategy_from_string(const std::string& s, size_t row) {
    if (s == "Cache") return Strategy::Cache;
    if (s == "LocalIndex") return Strategy::LocalIndex;
    if (s == "AcademicDB") return Strategy::AcademicDB;
    if (s == "WebSearch") return Strategy::WebSearch;
    if (s == "LLMReparse") return Strategy::LLMReparse;
    if (s == "None") return Strategy::None;
    throw CsvError("unknown strategy: " + s, row);
}

inline VerdictStatus status_from_string(const std::string& s, size_t row) {
    if (s == "Valid") return VerdictStatus::Valid;
    if (s == "Invalid") return VerdictStatus::Invalid;
    if (s == "NonAcademic") return VerdictStatus::NonAcademic;
    if (s == "ParseFailure") return VerdictStatus::ParseFailure;
    throw CsvError("unknown status: " + s, row);
}

}  // namespace detail

inline void write_csv_header(std::ostream& out) { out << kCsvHeader << "\r\n"; }

inline void write_csv_row(std::ostream& out, const VerificationResult& r) {
    using detail::csv_field;
    const auto opt_str = [](const std::optional<std::string>& s) { return s.value_or(""); };
    std::vector<std::string> fields;
    fields.reserve(kCsvColumns);
    fields.push_back(r.raw.paper_id);
    fields.push_back(std::to_string(r.raw.ref_index));
    fields.push_back(r.raw.text);
    fields.push_back(opt_str(r.reference.title));
    fields.push_back(detail::join_authors(r.reference.authors));
    fields.push_back(r.reference.year ? std::to_string(*r.reference.year) : "");
    fields.push_back(opt_str(r.reference.venue));
    fields.push_back(to_string(r.verdict.status));
    fields.push_back(r.verdict.invalid_kind ? to_string(*r.verdict.invalid_kind) : "");
    fields.push_back(to_string(r.diagnosing_strategy));
    fields.push_back(r.best_similarity ? detail::format_similarity(*r.best_similarity) : "");
    fields.push_back(r.matched ? r.matched->title : "");
    fields.push_back(r.matched ? detail::join_authors(r.matched->authors) : "");
    fields.push_back(r.matched && r.matched->year ? std::to_string(*r.matched->year) : "");
    fields.push_back(r.matched && r.matched->venue ? *r.matched->venue : "");
    fields.push_back(r.notes);
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_field(fields[i]);
    }
    out << "\r\n";
}

inline void export_csv(const std::vector<VerificationResult>& results,
                       const std::string& out_path) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open CSV for writing: " + out_path);
    write_csv_header(out);
    for (const auto& r : results) write_csv_row(out, r);
    out.flush();
    if (!out) throw IoFailure("failed writing CSV: " + out_path);
}

/// Parses a results CSV back into VerificationResults. Throws CsvError
/// with the offending row number.
inline std::vector<VerificationResult> parse_csv(std::istream& in) {
    std::vector<std::string> fields;
    size_t row = 1;
    if (!detail::read_csv_record(in, fields, row)) throw CsvError("empty CSV", 1);
    if (fields.size() != kCsvColumns || fields[0] != "paper_id")
        throw CsvError("unexpected header", 1);
    std::vector<VerificationResult> out;
    while (detail::read_csv_record(in, fields, ++row)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
        if (fields.size() != kCsvColumns)
            throw CsvError("expected " + std::to_string(kCsvColumns) + " columns, got " +
                               std::to_string(fields.size()),
                           row);
        VerificationResult r;
        r.raw.paper_id = fields[0];
        try {
            r.raw.ref_index = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw CsvError("bad ref_index: " + fields[1], row);
        }
        r.raw.text = fields[2];
        if (!fields[3].empty()) r.reference.title = fields[3];
        r.reference.authors = detail::split_authors_field(fields[4]);
        if (!fields[5].empty()) r.reference.year = std::stoi(fields[5]);
        if (!fields[6].empty()) r.reference.venue = fields[6];
        r.verdict.status = detail::status_from_string(fields[7], row);
        if (fields[8] == "MetadataError") r.verdict.invalid_kind = InvalidKind::MetadataError;
        else if (fields[8] == "Ghost") r.verdict.invalid_kind = InvalidKind::Ghost;
        else if (!fields[8].empty()) throw CsvError("unknown invalid_kind: " + fields[8], row);
        r.diagnosing_strategy = detail::strategy_from_string(fields[9], row);
        if (!fields[10].empty()) r.best_similarity = std::stod(fields[10]);
        if (!fields[11].empty()) {
            BiblioRecord m;
            m.title = fields[11];
            m.authors = detail::split_authors_field(fields[12]);
            if (!fields[13].empty()) m.year = std::stoi(fields[13]);
            if (!fields[14].empty()) m.venue = fields[14];
            r.matched = std::move(m);
        }
        r.notes = fields[15];
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<VerificationResult> parse_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open CSV: " + path);
    return parse_csv(in);
}

/// (paper_id, ref_index) pairs already present in a results CSV; used by
/// --resume. A missing file yields an empty set.
inline std::set<std::pair<std::string, int>> exported_pairs(const std::string& path) {
    std::set<std::pair<std::string, int>> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    for (const auto& r : parse_csv(in)) out.insert({r.raw.paper_id, r.raw.ref_index});
    return out;
}

}  // namespace citecheck
