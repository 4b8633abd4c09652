#pragma once
// Clients for the external structured-extraction service and the LLM
// reparser, plus JSON schema validation for reparse responses.

#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citecheck/core.hpp"
#include "citecheck/parse.hpp"

namespace citecheck {

struct ServiceUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedServiceResponse : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProviderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structured-extraction service handle. The engine treats the service as
/// a black box that turns document bytes into ordered reference strings.
class ExtractionClient {
  public:
    virtual ~ExtractionClient() = default;
    // Throws ServiceUnavailable / MalformedServiceResponse.
    virtual std::vector<std::string> extract(const std::string& doc_bytes) = 0;
};

/// Completion-style LLM provider handle.
class LlmClient {
  public:
    virtual ~LlmClient() = default;
    // Returns the raw completion text. Throws ProviderError.
    virtual std::string complete(const std::string& prompt) = 0;
};

inline ExtractionDocument extract_references(const std::string& doc_bytes,
                                             const std::string& doc_id,
                                             ExtractionClient& client) {
    const auto lines = client.extract(doc_bytes);
    ExtractionDocument doc;
    doc.doc_id = doc_id;
    int index = 0;
    for (const auto& line : lines) {
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        doc.references.push_back(RawReference{t, doc_id, index++});
    }
    return doc;
}

/// The fixed instruction sent to the reparser. Embeds the raw string and
/// the output field schema.
inline std::string reparse_prompt(const ReparseRequest& req) {
    return "Extract structured bibliographic metadata from the following raw citation "
           "string and output ONLY a single JSON object, no other text whatsoever.\n\n"
           "Citation:\n" + req.raw.text + "\n\n"
           "Output fields:\n"
           "- author: Array of author name strings, including all author names (required)\n"
           "- title: Full article title (required)\n"
           "- venue: Name of the published journal, conference, or platform (required)\n"
           "- year: Publication year, in numeric format (required)\n"
           "- url: Article access link, fill in null if none\n"
           "- doi: DOI number, fill in null if none\n"
           "- reference_type: choose from: article (conference/journal papers), "
           "series (book series), thesis (degree theses), monograph (books), "
           "unknown (when type cannot be determined)\n";
}

namespace detail {

inline std::optional<int> schema_year(const nlohmann::json& v) {
    if (v.is_number_integer()) {
        const int y = v.get<int>();
        return plausible_year(y) ? std::optional<int>(y) : std::nullopt;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.empty() || s.size() > 4 ||
            !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
            throw SchemaViolation("year must be numeric, got: " + s);
        const int y = std::stoi(s);
        return plausible_year(y) ? std::optional<int>(y) : std::nullopt;
    }
    if (v.is_null()) throw SchemaViolation("year is required");
    throw SchemaViolation("year must be numeric");
}

inline std::optional<std::string> schema_opt_string(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    if (!obj[key].is_string()) throw SchemaViolation(std::string(key) + " must be a string");
    const std::string s = trim(obj[key].get<std::string>());
    if (s.empty() || s == "null") return std::nullopt;
    return s;
}

}  // namespace detail

/// Validates a reparse response against the field schema and converts it
/// into a ParsedReference. Throws SchemaViolation on any deviation; there
/// is no partial acceptance.
inline ParsedReference parse_reparse_response(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
        // tolerate a ```json fence around the object
        const auto b = text.find('{');
        const auto e = text.rfind('}');
        if (b == std::string::npos || e == std::string::npos || e < b)
            throw SchemaViolation("response is not a JSON object");
        j = nlohmann::json::parse(text.substr(b, e - b + 1), nullptr, false);
        if (j.is_discarded()) throw SchemaViolation("response is not a JSON object");
    }
    if (j.is_array() && j.size() == 1) j = j[0];
    if (!j.is_object()) throw SchemaViolation("response must be a single JSON object");

    ParsedReference out;
    if (!j.contains("title") || !j["title"].is_string())
        throw SchemaViolation("title is required");
    out.title = detail::trim(j["title"].get<std::string>());
    if (normalize_title(*out.title).empty()) throw SchemaViolation("title is empty");

    if (!j.contains("author") || !j["author"].is_array())
        throw SchemaViolation("author must be an array");
    for (const auto& a : j["author"]) {
        if (!a.is_string()) throw SchemaViolation("author entries must be strings");
        const std::string name = detail::trim(a.get<std::string>());
        if (!name.empty()) out.authors.push_back(name);
    }

    out.venue = detail::schema_opt_string(j, "venue");
    if (!j.contains("year")) throw SchemaViolation("year is required");
    out.year = detail::schema_year(j["year"]);
    out.url = detail::schema_opt_string(j, "url");
    out.doi = detail::schema_opt_string(j, "doi");
    if (auto rt = detail::schema_opt_string(j, "reference_type"))
        out.reference_type = reference_type_from_string(*rt);
    return out;
}

/// Reparses a raw citation string through the LLM provider.
inline ParsedReference llm_reparse(const ReparseRequest& req, LlmClient& client) {
    if (detail::trim(req.raw.text).empty())
        throw SchemaViolation("reparse requires non-empty raw text");
    return parse_reparse_response(client.complete(reparse_prompt(req)));
}

}  // namespace citecheck
