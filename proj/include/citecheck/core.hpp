#pragma once
// Shared domain types for the citation verification engine.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace citecheck {

struct ConstraintViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An unparsed citation string plus provenance.
struct RawReference {
    std::string text;      // verbatim reference line, non-empty after trimming
    std::string paper_id;  // identifier of the containing document
    int ref_index = 0;     // position within the bibliography, >= 0

    friend bool operator==(const RawReference&, const RawReference&) = default;
};

enum class ReferenceType { Article, Series, Thesis, Monograph, Unknown };

/// Structured metadata extracted from a RawReference.
struct ParsedReference {
    std::optional<std::string> title;
    std::vector<std::string> authors;
    std::optional<int> year;  // 1800-2100 plausibility band
    std::optional<std::string> venue;
    std::optional<std::string> url;
    std::optional<std::string> doi;
    ReferenceType reference_type = ReferenceType::Unknown;

    friend bool operator==(const ParsedReference&, const ParsedReference&) = default;
};

enum class RecordSource { LocalIndex, AcademicDB, WebSearch, Cache };

/// A ground-truth record from a bibliographic source.
struct BiblioRecord {
    std::string title;  // non-empty
    std::vector<std::string> authors;
    std::optional<int> year;
    std::optional<std::string> venue;
    RecordSource source = RecordSource::LocalIndex;
    std::optional<std::string> external_id;

    friend bool operator==(const BiblioRecord&, const BiblioRecord&) = default;
};

enum class VerdictStatus { Valid, Invalid, NonAcademic, ParseFailure };

// Sub-label attached by human review, never inferred automatically.
enum class InvalidKind { MetadataError, Ghost };

struct Verdict {
    VerdictStatus status = VerdictStatus::Invalid;
    std::optional<InvalidKind> invalid_kind;  // only meaningful when status == Invalid

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

enum class Strategy { Cache, LocalIndex, AcademicDB, WebSearch, LLMReparse, None };

/// The verdict for one reference.
struct VerificationResult {
    RawReference raw;
    ParsedReference reference;
    Verdict verdict;
    std::optional<double> best_similarity;  // in [0,1], absent when no candidate retrieved
    std::optional<BiblioRecord> matched;
    Strategy diagnosing_strategy = Strategy::None;
    std::string notes;

    friend bool operator==(const VerificationResult&, const VerificationResult&) = default;
};

inline const char* to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::Valid: return "Valid";
        case VerdictStatus::Invalid: return "Invalid";
        case VerdictStatus::NonAcademic: return "NonAcademic";
        case VerdictStatus::ParseFailure: return "ParseFailure";
    }
    return "?";
}

inline const char* to_string(InvalidKind k) {
    return k == InvalidKind::MetadataError ? "MetadataError" : "Ghost";
}

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Cache: return "Cache";
        case Strategy::LocalIndex: return "LocalIndex";
        case Strategy::AcademicDB: return "AcademicDB";
        case Strategy::WebSearch: return "WebSearch";
        case Strategy::LLMReparse: return "LLMReparse";
        case Strategy::None: return "None";
    }
    return "?";
}

inline const char* to_string(RecordSource s) {
    switch (s) {
        case RecordSource::LocalIndex: return "LocalIndex";
        case RecordSource::AcademicDB: return "AcademicDB";
        case RecordSource::WebSearch: return "WebSearch";
        case RecordSource::Cache: return "Cache";
    }
    return "?";
}

inline const char* to_string(ReferenceType t) {
    switch (t) {
        case ReferenceType::Article: return "article";
        case ReferenceType::Series: return "series";
        case ReferenceType::Thesis: return "thesis";
        case ReferenceType::Monograph: return "monograph";
        case ReferenceType::Unknown: return "unknown";
    }
    return "unknown";
}

inline ReferenceType reference_type_from_string(const std::string& s) {
    if (s == "article") return ReferenceType::Article;
    if (s == "series") return ReferenceType::Series;
    if (s == "thesis") return ReferenceType::Thesis;
    if (s == "monograph") return ReferenceType::Monograph;
    return ReferenceType::Unknown;
}

namespace detail {

// Author lists are stored and exported as a single "; "-joined field.
inline std::string join_authors(const std::vector<std::string>& authors) {
    std::string out;
    for (const auto& a : authors) {
        if (!out.empty()) out += "; ";
        out += a;
    }
    return out;
}

inline std::vector<std::string> split_authors_field(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < s.size()) {
        auto sep = s.find("; ", pos);
        if (sep == std::string::npos) sep = s.size();
        if (sep > pos) out.push_back(s.substr(pos, sep - pos));
        pos = sep + 2;
    }
    return out;
}

}  // namespace detail

/// Checked constructor for VerificationResult. Enforces the cross-field
/// invariants: Valid requires a matched record with similarity present,
/// a matched record always carries a similarity, invalid_kind only
/// accompanies an Invalid status.
inline VerificationResult make_result(RawReference raw, ParsedReference ref, Verdict verdict,
                                      std::optional<double> sim,
                                      std::optional<BiblioRecord> matched, Strategy strategy,
                                      std::string notes = {}) {
    if (verdict.invalid_kind && verdict.status != VerdictStatus::Invalid)
        throw ConstraintViolation("invalid_kind requires status=Invalid");
    if (verdict.status == VerdictStatus::Valid && (!matched || !sim))
        throw ConstraintViolation("Valid verdict requires a matched record and similarity");
    if (matched && !sim)
        throw ConstraintViolation("matched record requires best_similarity");
    if (sim && (*sim < 0.0 || *sim > 1.0))
        throw ConstraintViolation("best_similarity out of [0,1]");
    return VerificationResult{std::move(raw),    std::move(ref), verdict, sim,
                              std::move(matched), strategy,      std::move(notes)};
}

}  // namespace citecheck
