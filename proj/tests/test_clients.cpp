#include <catch2/catch_amalgamated.hpp>

#include "citecheck/clients.hpp"

using namespace citecheck;

namespace {

class ScriptedLlm final : public LlmClient {
  public:
    explicit ScriptedLlm(std::string response) : response_(std::move(response)) {}
    std::string complete(const std::string& prompt) override {
        last_prompt = prompt;
        return response_;
    }
    std::string last_prompt;

  private:
    std::string response_;
};

class ScriptedExtraction final : public ExtractionClient {
  public:
    explicit ScriptedExtraction(std::vector<std::string> lines) : lines_(std::move(lines)) {}
    std::vector<std::string> extract(const std::string&) override { return lines_; }

  private:
    std::vector<std::string> lines_;
};

const RawReference kRaw{"[1] A. Author. Some mangled titel. Venue, 2020.", "p1", 0};

}  // namespace

TEST_CASE("llm_reparse round-trips a schema-valid response") {
    ScriptedLlm llm(R"({
        "author": ["Ada Author", "Bob Builder"],
        "title": "Some Corrected Title",
        "venue": "Journal of Tests",
        "year": 2020,
        "url": null,
        "doi": null,
        "reference_type": "article"
    })");
    const auto ref = llm_reparse(ReparseRequest{kRaw}, llm);
    CHECK(ref.title == "Some Corrected Title");
    CHECK(ref.authors == std::vector<std::string>{"Ada Author", "Bob Builder"});
    CHECK(ref.venue == "Journal of Tests");
    CHECK(ref.year == 2020);
    CHECK(ref.reference_type == ReferenceType::Article);
    // the instruction embeds the raw string and the field schema
    CHECK(llm.last_prompt.find(kRaw.text) != std::string::npos);
    CHECK(llm.last_prompt.find("author: Array of author name strings") != std::string::npos);
}

TEST_CASE("llm_reparse rejects prose responses") {
    ScriptedLlm llm("Sure! Here is what I found about that citation...");
    CHECK_THROWS_AS(llm_reparse(ReparseRequest{kRaw}, llm), SchemaViolation);
}

TEST_CASE("llm_reparse rejects non-numeric years") {
    ScriptedLlm llm(R"({"author": ["A"], "title": "T is long enough", "venue": "V",
                        "year": "MMXX", "reference_type": "article"})");
    CHECK_THROWS_AS(llm_reparse(ReparseRequest{kRaw}, llm), SchemaViolation);
}

TEST_CASE("llm_reparse rejects missing required fields") {
    ScriptedLlm no_title(R"({"author": ["A"], "venue": "V", "year": 2020})");
    CHECK_THROWS_AS(llm_reparse(ReparseRequest{kRaw}, no_title), SchemaViolation);
    ScriptedLlm no_authors(R"({"title": "A Title", "venue": "V", "year": 2020})");
    CHECK_THROWS_AS(llm_reparse(ReparseRequest{kRaw}, no_authors), SchemaViolation);
    ScriptedLlm author_not_array(R"({"author": "A", "title": "T", "venue": "V", "year": 2020})");
    CHECK_THROWS_AS(llm_reparse(ReparseRequest{kRaw}, author_not_array), SchemaViolation);
}

TEST_CASE("llm_reparse tolerates a fenced JSON object") {
    ScriptedLlm llm("```json\n{\"author\": [\"A\"], \"title\": \"Fenced Title\", "
                    "\"venue\": \"V\", \"year\": 2021}\n```");
    const auto ref = llm_reparse(ReparseRequest{kRaw}, llm);
    CHECK(ref.title == "Fenced Title");
    CHECK(ref.year == 2021);
}

TEST_CASE("extract_references preserves order and skips blanks") {
    ScriptedExtraction svc({"[1] First ref. V, 2020.", "  ", "[2] Second ref. V, 2021."});
    const auto doc = extract_references("pdfbytes", "docA", svc);
    CHECK(doc.doc_id == "docA");
    REQUIRE(doc.references.size() == 2);
    CHECK(doc.references[0].ref_index == 0);
    CHECK(doc.references[1].ref_index == 1);
    CHECK(doc.references[1].paper_id == "docA");
}

TEST_CASE("extract_references on an empty document") {
    ScriptedExtraction svc({});
    const auto doc = extract_references("", "empty", svc);
    CHECK(doc.references.empty());
}
