#pragma once
// The verification cascade: Cache -> LocalIndex -> AcademicDB -> WebSearch
// -> LLMReparse, with a persistent cache, bounded-concurrency remote
// clients and resumable batch processing.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "citecheck/cache.hpp"
#include "citecheck/clients.hpp"
#include "citecheck/core.hpp"
#include "citecheck/index.hpp"
#include "citecheck/normalize.hpp"
#include "citecheck/parse.hpp"

namespace citecheck {

struct RateLimited : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Timeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AllSourcesUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DependencyMissing : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Provider-agnostic search contract: up to k records with a title and
/// optional authors/year/venue.
class SearchProvider {
  public:
    virtual ~SearchProvider() = default;
    // Throws RateLimited / Timeout / ProviderError.
    virtual std::vector<BiblioRecord> search(const std::string& query, int k) = 0;
};

struct CascadePolicy {
    // Stages may be disabled but never reordered.
    bool enable_cache = true;
    bool enable_local_index = true;
    bool enable_academic_db = true;
    bool enable_web_search = true;
    bool enable_llm_reparse = true;
    int concurrency_limit = 10;  // in-flight remote operations
    int retry_count = 2;
    std::chrono::milliseconds retry_initial_backoff{1000};
    std::chrono::seconds invalid_staleness{30LL * 24 * 3600};  // Invalid cache entries decay
    int candidates_k = 10;
};

struct CascadeDeps {
    VerificationCache* cache = nullptr;
    const BiblioIndex* index = nullptr;
    SearchProvider* academic = nullptr;
    SearchProvider* web = nullptr;
    LlmClient* llm = nullptr;
};

/// Counting guard: at most N concurrently admitted remote operations.
class ConcurrencyLimiter {
  public:
    explicit ConcurrencyLimiter(int limit) : limit_(limit) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return in_flight_ < limit_; });
        ++in_flight_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }

    struct Guard {
        ConcurrencyLimiter& limiter;
        explicit Guard(ConcurrencyLimiter& l) : limiter(l) { limiter.acquire(); }
        ~Guard() { limiter.release(); }
    };

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
};

/// Rate-limited, retrying remote lookup. Transport-level failures
/// (RateLimited, Timeout, ProviderError) are retried with exponential
/// backoff up to policy.retry_count times, then rethrown.
inline std::vector<BiblioRecord> remote_search(SearchProvider& client, const std::string& query,
                                               int k, const CascadePolicy& policy,
                                               ConcurrencyLimiter& limiter) {
    if (query.empty()) throw DependencyMissing("remote_search: empty query");
    auto backoff = policy.retry_initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            ConcurrencyLimiter::Guard guard(limiter);
            return client.search(query, k);
        } catch (const std::runtime_error&) {
            if (attempt >= policy.retry_count) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

namespace detail {

struct StageOutcome {
    std::optional<SimilarityScore> best;
    Strategy best_from = Strategy::None;
    int remote_attempts = 0;
    int remote_errors = 0;
    std::string notes;
};

inline std::vector<SimilarityScore> score_candidates(const std::string& normalized_query,
                                                     std::vector<BiblioRecord> records) {
    std::vector<SimilarityScore> scores;
    scores.reserve(records.size());
    for (auto& r : records) {
        const double s = similarity(normalized_query, normalize_title(r.title));
        scores.push_back(SimilarityScore{s, std::move(r)});
    }
    return scores;
}

inline void track_best(StageOutcome& acc, const std::optional<SimilarityScore>& best,
                       Strategy from) {
    if (best && (!acc.best || best->value > acc.best->value)) {
        acc.best = best;
        acc.best_from = from;
    }
}

}  // namespace detail

/// Runs the cascade for one reference. The first stage whose candidates
/// classify Valid terminates; otherwise LLMReparse runs at most once and
/// re-enters the retrieval stages with corrected metadata. Throws
/// AllSourcesUnavailable when every enabled remote stage errored and the
/// local stages produced nothing.
inline VerificationResult verify_one(const ParsedReference& ref, const RawReference& raw,
                                     const CascadeDeps& deps, const CascadePolicy& policy,
                                     const MatchConfig& cfg, ConcurrencyLimiter& limiter) {
    if (!ref.title && !(policy.enable_llm_reparse && deps.llm))
        throw DependencyMissing("reference has no title and no reparse path");

    detail::StageOutcome acc;

    auto cache_valid_entry = [&](const std::string& key, const SimilarityScore& best) {
        if (!deps.cache) return;
        CacheEntry e;
        e.key = key;
        e.result_status = VerdictStatus::Valid;
        e.matched = best.candidate;
        e.best_similarity = best.value;
        e.stored_at = now_unix_seconds();
        deps.cache->put(e);
    };

    // Stage 1: cache.
    std::string key;
    if (ref.title) key = normalize_title(*ref.title);
    if (policy.enable_cache && deps.cache && !key.empty()) {
        if (auto entry = deps.cache->get(key)) {
            const bool fresh =
                entry->result_status == VerdictStatus::Valid ||
                now_unix_seconds() - entry->stored_at < policy.invalid_staleness.count();
            if (fresh) {
                Verdict v{entry->result_status, std::nullopt};
                std::optional<BiblioRecord> matched;
                if (v.status == VerdictStatus::Valid) matched = entry->matched;
                return make_result(raw, ref, v, entry->best_similarity, std::move(matched),
                                   Strategy::Cache, "cache hit");
            }
            // stale Invalid entry: fall through and re-verify
        }
    }

    // Stages 2-4 over a (possibly reparsed) reference.
    auto retrieval_pass =
        [&](const ParsedReference& r,
            Strategy report_as) -> std::optional<VerificationResult> {
        if (!r.title) return std::nullopt;
        const std::string nq = normalize_title(*r.title);
        if (nq.empty()) return std::nullopt;

        struct Stage {
            Strategy strategy;
            bool enabled;
        };
        const Stage stages[] = {
            {Strategy::LocalIndex, policy.enable_local_index && deps.index != nullptr},
            {Strategy::AcademicDB, policy.enable_academic_db && deps.academic != nullptr},
            {Strategy::WebSearch, policy.enable_web_search && deps.web != nullptr},
        };
        for (const auto& stage : stages) {
            if (!stage.enabled) continue;
            std::vector<BiblioRecord> records;
            if (stage.strategy == Strategy::LocalIndex) {
                records = deps.index->query_by_title(*r.title, policy.candidates_k);
            } else {
                ++acc.remote_attempts;
                SearchProvider& provider =
                    stage.strategy == Strategy::AcademicDB ? *deps.academic : *deps.web;
                try {
                    records = remote_search(provider, *r.title, policy.candidates_k, policy,
                                            limiter);
                } catch (const std::runtime_error& e) {
                    ++acc.remote_errors;
                    acc.notes += std::string(to_string(stage.strategy)) + " error: " + e.what() +
                                 "; ";
                    continue;
                }
            }
            auto scores = detail::score_candidates(nq, std::move(records));
            auto [verdict, best] = classify(scores, cfg);
            detail::track_best(acc, best, stage.strategy);
            if (verdict.status == VerdictStatus::Valid) {
                cache_valid_entry(nq, *best);
                const Strategy diag =
                    report_as == Strategy::LLMReparse ? Strategy::LLMReparse : stage.strategy;
                return make_result(raw, r, verdict, best->value, best->candidate, diag,
                                   acc.notes);
            }
        }
        return std::nullopt;
    };

    if (auto result = retrieval_pass(ref, Strategy::None)) return *result;

    // Stage 5: LLM reparse, at most once, then re-enter retrieval.
    if (policy.enable_llm_reparse && deps.llm && !detail::trim(raw.text).empty()) {
        try {
            const ParsedReference corrected = llm_reparse(ReparseRequest{raw}, *deps.llm);
            if (auto result = retrieval_pass(corrected, Strategy::LLMReparse)) return *result;
        } catch (const std::runtime_error& e) {
            acc.notes += std::string("LLMReparse error: ") + e.what() + "; ";
        }
    }

    if (!acc.best && acc.remote_attempts > 0 && acc.remote_errors == acc.remote_attempts)
        throw AllSourcesUnavailable("all remote stages failed: " + acc.notes);

    // No stage produced a Valid classification: final verdict is Invalid
    // carrying the best similarity seen.
    Verdict v{VerdictStatus::Invalid, std::nullopt};
    std::optional<double> sim;
    if (acc.best) sim = acc.best->value;
    if (deps.cache && !key.empty()) {
        CacheEntry e;
        e.key = key;
        e.result_status = VerdictStatus::Invalid;
        e.best_similarity = sim;
        e.stored_at = now_unix_seconds();
        deps.cache->put(e);
    }
    return make_result(raw, ref, v, sim, std::nullopt, acc.best_from, acc.notes);
}

struct BatchInput {
    RawReference raw;
    std::optional<ParsedReference> parsed;  // absent when the heuristic parse failed
};

/// (paper_id, ref_index) pairs already present in the output; skipped on
/// rerun.
using DoneSet = std::set<std::pair<std::string, int>>;

/// Verifies a batch concurrently. Results arrive at the sink in input
/// order as they complete, so a crash loses at most the in-flight window.
/// Per-reference failures land in that result's notes; the batch never
/// aborts. Returns all newly produced results in input order.
inline std::vector<VerificationResult> run_batch(
    const std::vector<BatchInput>& inputs, const CascadeDeps& deps, const CascadePolicy& policy,
    const MatchConfig& cfg, const DoneSet& already_done = {},
    const std::function<void(const VerificationResult&)>& sink = nullptr) {
    std::vector<const BatchInput*> todo;
    for (const auto& in : inputs)
        if (!already_done.count({in.raw.paper_id, in.raw.ref_index})) todo.push_back(&in);
    if (todo.empty()) return {};

    ConcurrencyLimiter limiter(policy.concurrency_limit);
    std::vector<std::optional<VerificationResult>> results(todo.size());
    std::atomic<size_t> next{0};
    std::mutex flush_mu;
    size_t flushed = 0;

    auto process = [&](const BatchInput& in) -> VerificationResult {
        try {
            if (!in.parsed) {
                // heuristic parse failed: the reparse path is the last resort
                if (policy.enable_llm_reparse && deps.llm) {
                    try {
                        const ParsedReference corrected =
                            llm_reparse(ReparseRequest{in.raw}, *deps.llm);
                        VerificationResult r =
                            verify_one(corrected, in.raw, deps, policy, cfg, limiter);
                        // the rescue only succeeded because of the reparse
                        if (r.verdict.status == VerdictStatus::Valid)
                            r.diagnosing_strategy = Strategy::LLMReparse;
                        return r;
                    } catch (const AllSourcesUnavailable&) {
                        throw;
                    } catch (const std::runtime_error&) {}
                }
                return make_result(in.raw, ParsedReference{},
                                   Verdict{VerdictStatus::ParseFailure, std::nullopt},
                                   std::nullopt, std::nullopt, Strategy::None,
                                   "unparseable reference");
            }
            if (detect_non_academic(*in.parsed, in.raw))
                return make_result(in.raw, *in.parsed,
                                   Verdict{VerdictStatus::NonAcademic, std::nullopt},
                                   std::nullopt, std::nullopt, Strategy::None,
                                   "url-dominant reference");
            return verify_one(*in.parsed, in.raw, deps, policy, cfg, limiter);
        } catch (const AllSourcesUnavailable& e) {
            return make_result(in.raw, in.parsed.value_or(ParsedReference{}),
                               Verdict{VerdictStatus::Invalid, std::nullopt}, std::nullopt,
                               std::nullopt, Strategy::None,
                               std::string("AllSourcesUnavailable: ") + e.what());
        } catch (const std::exception& e) {
            return make_result(in.raw, in.parsed.value_or(ParsedReference{}),
                               Verdict{VerdictStatus::Invalid, std::nullopt}, std::nullopt,
                               std::nullopt, Strategy::None, std::string("error: ") + e.what());
        }
    };

    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            VerificationResult r = process(*todo[i]);
            std::lock_guard lock(flush_mu);
            results[i] = std::move(r);
            while (flushed < results.size() && results[flushed]) {
                if (sink) sink(*results[flushed]);
                ++flushed;
            }
        }
    };

    const size_t n_threads =
        std::min<size_t>(std::max(1, policy.concurrency_limit), todo.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::vector<VerificationResult> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

}  // namespace citecheck
