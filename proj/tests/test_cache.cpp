#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "citecheck/cache.hpp"

using namespace citecheck;
namespace fs = std::filesystem;

namespace {

std::string fresh_cache_path(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("citecheck_cache_" + name + ".db");
    fs::remove(p);
    return p.string();
}

CacheEntry sample_entry() {
    CacheEntry e;
    e.key = "attention is all you need";
    e.result_status = VerdictStatus::Valid;
    BiblioRecord r;
    r.title = "Attention Is All You Need";
    r.authors = {"Ashish Vaswani", "Noam Shazeer"};
    r.year = 2017;
    r.venue = "NeurIPS";
    e.matched = r;
    e.best_similarity = 1.0;
    e.stored_at = 1700000000;
    return e;
}

}  // namespace

TEST_CASE("get-after-put returns the entry") {
    VerificationCache cache(fresh_cache_path("roundtrip"));
    const auto e = sample_entry();
    cache.put(e);
    const auto got = cache.get(e.key);
    REQUIRE(got.has_value());
    CHECK(got->key == e.key);
    CHECK(got->result_status == VerdictStatus::Valid);
    REQUIRE(got->matched.has_value());
    CHECK(got->matched->title == e.matched->title);
    CHECK(got->matched->authors == e.matched->authors);
    CHECK(got->matched->year == e.matched->year);
    CHECK(got->matched->venue == e.matched->venue);
    CHECK(got->matched->source == RecordSource::Cache);
    CHECK(got->best_similarity == 1.0);
    CHECK(got->stored_at == e.stored_at);
}

TEST_CASE("unknown key is absent") {
    VerificationCache cache(fresh_cache_path("absent"));
    CHECK_FALSE(cache.get("never stored").has_value());
}

TEST_CASE("last writer wins") {
    VerificationCache cache(fresh_cache_path("lww"));
    auto e = sample_entry();
    cache.put(e);
    e.result_status = VerdictStatus::Invalid;
    e.matched.reset();
    e.best_similarity = 0.3;
    cache.put(e);
    const auto got = cache.get(e.key);
    REQUIRE(got.has_value());
    CHECK(got->result_status == VerdictStatus::Invalid);
    CHECK_FALSE(got->matched.has_value());
    CHECK(got->best_similarity == 0.3);
    CHECK(cache.count() == 1);
}

TEST_CASE("persistence survives reopening") {
    const auto path = fresh_cache_path("persist");
    {
        VerificationCache cache(path);
        cache.put(sample_entry());
    }
    VerificationCache reopened(path);
    const auto got = reopened.get(sample_entry().key);
    REQUIRE(got.has_value());
    CHECK(got->result_status == VerdictStatus::Valid);
}
