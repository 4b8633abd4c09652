#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "citecheck/cascade.hpp"
#include "citecheck/index.hpp"
#include "fakes.hpp"

using namespace citecheck;
using fakes::CallLog;
using fakes::FakeLlm;
using fakes::FakeProvider;
namespace fs = std::filesystem;

namespace {

std::string fresh_path(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("citecheck_cascade_" + name);
    fs::remove(p);
    return p.string();
}

// a tiny real index with one known title
const std::string kStoredTitle = "Adaptive watermarking for source code protection";

BiblioIndex make_index(const std::string& name) {
    std::istringstream dump(
        "<dblp><article key=\"a1\"><author>Alex Brown</author>"
        "<title>" + kStoredTitle + "</title><year>2023</year>"
        "<journal>Journal of Software Engineering</journal></article></dblp>");
    const auto path = fresh_path(name + ".idx");
    build_index(dump, path);
    return BiblioIndex::open(path);
}

const RawReference kRaw{"[1] Alex Brown. " + kStoredTitle + ". JSE, 2023.", "p1", 0};

std::string reparse_json(const std::string& title) {
    return "{\"author\": [\"Alex Brown\"], \"title\": \"" + title +
           "\", \"venue\": \"JSE\", \"year\": 2023, \"reference_type\": \"article\"}";
}

}  // namespace

TEST_CASE("cache hit short-circuits the whole cascade") {
    VerificationCache cache(fresh_path("hit.db"));
    CacheEntry e;
    e.key = normalize_title(kStoredTitle);
    e.result_status = VerdictStatus::Valid;
    e.matched = fakes::record(kStoredTitle, RecordSource::Cache);
    e.best_similarity = 1.0;
    e.stored_at = now_unix_seconds();
    cache.put(e);

    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    FakeLlm llm(reparse_json(kStoredTitle), &log);
    CascadeDeps deps{&cache, nullptr, &academic, &web, &llm};
    ConcurrencyLimiter limiter(10);

    const auto result = verify_one(fakes::parsed_with_title(kStoredTitle), kRaw, deps,
                                   fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(result.verdict.status == VerdictStatus::Valid);
    CHECK(result.diagnosing_strategy == Strategy::Cache);
    CHECK(log.snapshot().empty());  // zero remote calls
}

TEST_CASE("local index hit stops before any remote stage") {
    const auto index = make_index("local");
    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    CascadeDeps deps{nullptr, &index, &academic, &web, nullptr};
    ConcurrencyLimiter limiter(10);

    const auto result = verify_one(fakes::parsed_with_title(kStoredTitle), kRaw, deps,
                                   fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(result.verdict.status == VerdictStatus::Valid);
    CHECK(result.diagnosing_strategy == Strategy::LocalIndex);
    REQUIRE(result.matched.has_value());
    CHECK(result.matched->title == kStoredTitle);
    CHECK(result.best_similarity == 1.0);
    CHECK(log.snapshot().empty());
}

TEST_CASE("stage order: academic before web, reparse last and at most once") {
    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    FakeLlm llm(reparse_json("Still An Unknown Title Nowhere To Be Found"), &log);
    CascadeDeps deps{nullptr, nullptr, &academic, &web, &llm};
    ConcurrencyLimiter limiter(10);

    const auto result = verify_one(fakes::parsed_with_title("Some Unknown Title Here"), kRaw,
                                   deps, fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(result.verdict.status == VerdictStatus::Invalid);
    const auto calls = log.snapshot();
    // first pass, then the reparse re-entry
    CHECK(calls == std::vector<std::string>{"academic", "web", "llm", "academic", "web"});
    CHECK(llm.calls == 1);
}

TEST_CASE("reparse corrects a mangled title that then hits the index") {
    const auto index = make_index("reparse");
    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    FakeLlm llm(reparse_json(kStoredTitle), &log);
    CascadeDeps deps{nullptr, &index, &academic, &web, &llm};
    ConcurrencyLimiter limiter(10);

    // mangled: similarity to the stored title is far below theta
    const std::string mangled = "Adaptive source code stuff";
    REQUIRE(similarity(normalize_title(mangled), normalize_title(kStoredTitle)) < 0.9);

    const auto result = verify_one(fakes::parsed_with_title(mangled), kRaw, deps,
                                   fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(result.verdict.status == VerdictStatus::Valid);
    CHECK(result.diagnosing_strategy == Strategy::LLMReparse);
    REQUIRE(result.matched.has_value());
    CHECK(result.matched->title == kStoredTitle);
}

TEST_CASE("remote_search retries transient failures") {
    CascadePolicy policy = fakes::fast_policy();
    ConcurrencyLimiter limiter(10);

    SECTION("429 then success") {
        FakeProvider p("p", nullptr);
        p.error_script = {"429"};
        p.responses["q"] = {fakes::record("hit", RecordSource::AcademicDB)};
        const auto records = remote_search(p, "q", 5, policy, limiter);
        REQUIRE(records.size() == 1);
        CHECK(records[0].title == "hit");
    }
    SECTION("persistent 500 exhausts retries") {
        FakeProvider p("p", nullptr);
        p.error_script = {"500", "500", "500", "500"};
        CHECK_THROWS_AS(remote_search(p, "q", 5, policy, limiter), ProviderError);
    }
    SECTION("empty query is refused") {
        FakeProvider p("p", nullptr);
        CHECK_THROWS_AS(remote_search(p, "", 5, policy, limiter), DependencyMissing);
    }
}

TEST_CASE("successful remote lookups are cached; second run is remote-free") {
    VerificationCache cache(fresh_path("idem.db"));
    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    academic.responses[kStoredTitle] = {fakes::record(kStoredTitle, RecordSource::AcademicDB)};
    CascadeDeps deps{&cache, nullptr, &academic, &web, nullptr};
    ConcurrencyLimiter limiter(10);

    const auto first = verify_one(fakes::parsed_with_title(kStoredTitle), kRaw, deps,
                                  fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(first.verdict.status == VerdictStatus::Valid);
    CHECK(first.diagnosing_strategy == Strategy::AcademicDB);
    CHECK(log.count("academic") == 1);

    const auto second = verify_one(fakes::parsed_with_title(kStoredTitle), kRaw, deps,
                                   fakes::fast_policy(), MatchConfig{}, limiter);
    CHECK(second.verdict.status == VerdictStatus::Valid);
    CHECK(second.diagnosing_strategy == Strategy::Cache);
    CHECK(log.count("academic") == 1);  // no new remote calls
}

TEST_CASE("final Invalid verdicts are cached and decay after the staleness horizon") {
    VerificationCache cache(fresh_path("neg.db"));
    CallLog log;
    FakeProvider academic("academic", &log), web("web", &log);
    CascadeDeps deps{&cache, nullptr, &academic, &web, nullptr};
    ConcurrencyLimiter limiter(10);
    CascadePolicy policy = fakes::fast_policy();

    const auto first = verify_one(fakes::parsed_with_title("An Untraceable Ghost Title"), kRaw,
                                  deps, policy, MatchConfig{}, limiter);
    CHECK(first.verdict.status == VerdictStatus::Invalid);
    const size_t calls_after_first = log.snapshot().size();

    // fresh Invalid entry answers from the cache
    const auto second = verify_one(fakes::parsed_with_title("An Untraceable Ghost Title"), kRaw,
                                   deps, policy, MatchConfig{}, limiter);
    CHECK(second.verdict.status == VerdictStatus::Invalid);
    CHECK(second.diagnosing_strategy == Strategy::Cache);
    CHECK(log.snapshot().size() == calls_after_first);

    // zero staleness horizon: the Invalid entry is stale, cascade re-runs
    policy.invalid_staleness = std::chrono::seconds(0);
    const auto third = verify_one(fakes::parsed_with_title("An Untraceable Ghost Title"), kRaw,
                                  deps, policy, MatchConfig{}, limiter);
    CHECK(third.verdict.status == VerdictStatus::Invalid);
    CHECK(log.snapshot().size() > calls_after_first);
}

TEST_CASE("all remote stages down with nothing local raises AllSourcesUnavailable") {
    FakeProvider academic("academic", nullptr), web("web", nullptr);
    academic.error_script = std::vector<std::string>(10, "500");
    web.error_script = std::vector<std::string>(10, "500");
    CascadeDeps deps{nullptr, nullptr, &academic, &web, nullptr};
    ConcurrencyLimiter limiter(10);

    CHECK_THROWS_AS(verify_one(fakes::parsed_with_title("Whatever Title"), kRaw, deps,
                               fakes::fast_policy(), MatchConfig{}, limiter),
                    AllSourcesUnavailable);
}

TEST_CASE("run_batch preserves order and captures per-reference errors") {
    const auto index = make_index("batch");
    CascadeDeps deps{nullptr, &index, nullptr, nullptr, nullptr};
    CascadePolicy policy = fakes::fast_policy();

    std::vector<BatchInput> inputs;
    for (int i = 0; i < 20; ++i) {
        BatchInput item;
        item.raw = {"ref " + std::to_string(i), "paper", i};
        item.parsed = fakes::parsed_with_title(i % 2 == 0 ? kStoredTitle
                                                          : "Unknown Title " + std::to_string(i));
        inputs.push_back(std::move(item));
    }

    std::vector<int> sink_order;
    const auto results = run_batch(inputs, deps, policy, MatchConfig{}, {},
                                   [&](const VerificationResult& r) {
                                       sink_order.push_back(r.raw.ref_index);
                                   });
    REQUIRE(results.size() == 20);
    for (int i = 0; i < 20; ++i) {
        CHECK(results[i].raw.ref_index == i);
        CHECK(sink_order[i] == i);
        CHECK(results[i].verdict.status ==
              (i % 2 == 0 ? VerdictStatus::Valid : VerdictStatus::Invalid));
    }
}

TEST_CASE("run_batch skips already-exported pairs") {
    const auto index = make_index("resume");
    CascadeDeps deps{nullptr, &index, nullptr, nullptr, nullptr};
    std::vector<BatchInput> inputs;
    for (int i = 0; i < 5; ++i)
        inputs.push_back({{"ref", "paper", i}, fakes::parsed_with_title(kStoredTitle)});
    DoneSet done{{"paper", 0}, {"paper", 3}};
    const auto results = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{}, done);
    REQUIRE(results.size() == 3);
    CHECK(results[0].raw.ref_index == 1);
    CHECK(results[1].raw.ref_index == 2);
    CHECK(results[2].raw.ref_index == 4);
}

TEST_CASE("run_batch on empty input") {
    CascadeDeps deps{};
    CHECK(run_batch({}, deps, fakes::fast_policy(), MatchConfig{}).empty());
}

TEST_CASE("run_batch routes parse failures through reparse or ParseFailure") {
    const auto index = make_index("pf");
    SECTION("no reparse path: ParseFailure verdict") {
        CascadeDeps deps{nullptr, &index, nullptr, nullptr, nullptr};
        std::vector<BatchInput> inputs = {{{"%%%###@@@", "paper", 0}, std::nullopt}};
        const auto results = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{});
        REQUIRE(results.size() == 1);
        CHECK(results[0].verdict.status == VerdictStatus::ParseFailure);
    }
    SECTION("reparse rescues the reference") {
        FakeLlm llm(reparse_json(kStoredTitle), nullptr);
        CascadeDeps deps{nullptr, &index, nullptr, nullptr, &llm};
        std::vector<BatchInput> inputs = {{{"mangled beyond parsing 2023", "paper", 0},
                                           std::nullopt}};
        const auto results = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{});
        REQUIRE(results.size() == 1);
        CHECK(results[0].verdict.status == VerdictStatus::Valid);
        CHECK(results[0].diagnosing_strategy == Strategy::LLMReparse);
    }
}

TEST_CASE("run_batch marks non-academic references without verification") {
    CascadeDeps deps{};
    ParsedReference blog;
    blog.url = "https://example.org/blog";
    std::vector<BatchInput> inputs = {{{"see https://example.org/blog", "paper", 0}, blog}};
    const auto results = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{});
    REQUIRE(results.size() == 1);
    CHECK(results[0].verdict.status == VerdictStatus::NonAcademic);
}

TEST_CASE("in-flight remote operations never exceed the concurrency limit") {
    CallLog log;
    FakeProvider academic("academic", nullptr);
    academic.delay = std::chrono::milliseconds(2);
    CascadeDeps deps{nullptr, nullptr, &academic, nullptr, nullptr};
    CascadePolicy policy = fakes::fast_policy();
    policy.concurrency_limit = 10;
    policy.enable_web_search = false;
    policy.enable_llm_reparse = false;

    std::vector<BatchInput> inputs;
    for (int i = 0; i < 100; ++i)
        inputs.push_back({{"ref", "paper", i},
                          fakes::parsed_with_title("Title number " + std::to_string(i))});
    const auto results = run_batch(inputs, deps, policy, MatchConfig{});
    CHECK(results.size() == 100);
    CHECK(academic.max_in_flight() <= 10);
    CHECK(academic.max_in_flight() >= 2);  // it did actually run concurrently
}

TEST_CASE("batch determinism with scripted deterministic providers") {
    const auto index = make_index("det");
    FakeProvider academic("academic", nullptr);
    academic.responses["Remote Only Title"] = {
        fakes::record("Remote Only Title", RecordSource::AcademicDB)};
    CascadeDeps deps{nullptr, &index, &academic, nullptr, nullptr};
    std::vector<BatchInput> inputs;
    for (int i = 0; i < 10; ++i)
        inputs.push_back({{"ref", "paper", i},
                          fakes::parsed_with_title(i % 3 == 0 ? kStoredTitle
                                                              : "Remote Only Title")});
    const auto a = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{});
    const auto b = run_batch(inputs, deps, fakes::fast_policy(), MatchConfig{});
    CHECK(a == b);
}
