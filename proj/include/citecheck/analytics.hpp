#pragma once
// Corpus-level statistics over verification results: rates, confidence
// intervals, venue/year aggregation, temporal trends, repeated-invalid
// grouping, multiset overlap, run stability and audit sample sizing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "citecheck/core.hpp"
#include "citecheck/normalize.hpp"

namespace citecheck {

struct EmptyDenominator : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TooFewClusters : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InsufficientYears : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TooFewRuns : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MissingJoinKey : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kZ95 = 1.959963984540054;  // two-sided 95% normal quantile

struct CorpusStats {
    int64_t total_refs = 0;
    int64_t parsed_refs = 0;
    int64_t valid = 0;
    int64_t invalid = 0;
    int64_t non_academic = 0;
    int64_t parse_failures = 0;
    double rate_invalid = 0.0;
    double ci95_margin = 0.0;  // percentage points
};

struct GroupKey {
    std::string venue;
    int year = 0;
    std::optional<std::string> paper_id;
};

/// Invalid fraction over the Valid+Invalid pool; NonAcademic and
/// ParseFailure are excluded from the denominator.
inline double invalid_rate(const std::vector<VerificationResult>& results) {
    int64_t valid = 0, invalid = 0;
    for (const auto& r : results) {
        if (r.verdict.status == VerdictStatus::Valid) ++valid;
        else if (r.verdict.status == VerdictStatus::Invalid) ++invalid;
    }
    if (valid + invalid == 0) throw EmptyDenominator("no Valid or Invalid results");
    return static_cast<double>(invalid) / static_cast<double>(valid + invalid);
}

/// Normal-approximation 95% margin for a binomial proportion, in the same
/// units as p.
inline double ci95_binomial(double p, int64_t n) {
    if (n < 1) throw EmptyDenominator("n must be >= 1");
    return kZ95 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

/// Cluster-level 95% margin: 1.96 * sd(cluster rates) / sqrt(#clusters).
inline double ci95_cluster(const std::vector<double>& cluster_rates) {
    const size_t n = cluster_rates.size();
    if (n < 2) throw TooFewClusters("need at least 2 clusters");
    double mean = 0.0;
    for (double r : cluster_rates) mean += r;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double r : cluster_rates) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return kZ95 * sd / std::sqrt(static_cast<double>(n));
}

inline CorpusStats corpus_stats(const std::vector<VerificationResult>& results) {
    CorpusStats s;
    s.total_refs = static_cast<int64_t>(results.size());
    for (const auto& r : results) {
        switch (r.verdict.status) {
            case VerdictStatus::Valid: ++s.valid; break;
            case VerdictStatus::Invalid: ++s.invalid; break;
            case VerdictStatus::NonAcademic: ++s.non_academic; break;
            case VerdictStatus::ParseFailure: ++s.parse_failures; break;
        }
    }
    s.parsed_refs = s.total_refs - s.parse_failures;
    const int64_t denom = s.valid + s.invalid;
    if (denom > 0) {
        s.rate_invalid = static_cast<double>(s.invalid) / static_cast<double>(denom);
        s.ci95_margin = ci95_binomial(s.rate_invalid, denom) * 100.0;
    }
    return s;
}

struct VenueAggregateRow {
    std::string venue;
    int64_t error_count = 0;  // Invalid with the MetadataError sub-label
    int64_t ghost_count = 0;  // Invalid with the Ghost sub-label
    int64_t invalid_count = 0;
    int64_t papers_with_invalid = 0;
    int64_t total_papers = 0;
    double rate = 0.0;  // papers_with_invalid / total_papers
};

/// Per-venue aggregation. `keys` lists every paper in the corpus (one
/// GroupKey with paper_id per paper); results join on paper_id.
inline std::vector<VenueAggregateRow> aggregate(const std::vector<VerificationResult>& results,
                                                const std::vector<GroupKey>& keys) {
    std::unordered_map<std::string, std::string> paper_venue;
    std::map<std::string, VenueAggregateRow> rows;
    for (const auto& k : keys) {
        if (!k.paper_id) throw MissingJoinKey("group key without paper_id");
        paper_venue[*k.paper_id] = k.venue;
        auto& row = rows[k.venue];
        row.venue = k.venue;
        ++row.total_papers;
    }
    std::map<std::string, std::set<std::string>> papers_hit;
    for (const auto& r : results) {
        if (r.verdict.status != VerdictStatus::Invalid) continue;
        const auto it = paper_venue.find(r.raw.paper_id);
        if (it == paper_venue.end())
            throw MissingJoinKey("result for unknown paper: " + r.raw.paper_id);
        auto& row = rows[it->second];
        ++row.invalid_count;
        if (r.verdict.invalid_kind == InvalidKind::MetadataError) ++row.error_count;
        else if (r.verdict.invalid_kind == InvalidKind::Ghost) ++row.ghost_count;
        papers_hit[it->second].insert(r.raw.paper_id);
    }
    std::vector<VenueAggregateRow> out;
    for (auto& [venue, row] : rows) {
        row.papers_with_invalid = static_cast<int64_t>(papers_hit[venue].size());
        if (row.total_papers > 0)
            row.rate = static_cast<double>(row.papers_with_invalid) /
                       static_cast<double>(row.total_papers);
        out.push_back(row);
    }
    return out;
}

struct YearCount {
    int year = 0;
    int64_t papers = 0;
    int64_t papers_with_invalid = 0;
};
struct YearRate {
    int year = 0;
    double rate = 0.0;
};
struct TrendResult {
    std::vector<YearRate> rates;
    double delta = 0.0;  // (last - mean of prior) / mean of prior
};

inline TrendResult temporal_trend(std::vector<YearCount> per_year) {
    if (per_year.size() < 2) throw InsufficientYears("need at least 2 years");
    std::sort(per_year.begin(), per_year.end(),
              [](const YearCount& a, const YearCount& b) { return a.year < b.year; });
    TrendResult out;
    for (const auto& y : per_year) {
        const double rate = y.papers > 0 ? static_cast<double>(y.papers_with_invalid) /
                                               static_cast<double>(y.papers)
                                         : 0.0;
        out.rates.push_back({y.year, rate});
    }
    double prior_mean = 0.0;
    for (size_t i = 0; i + 1 < out.rates.size(); ++i) prior_mean += out.rates[i].rate;
    prior_mean /= static_cast<double>(out.rates.size() - 1);
    if (prior_mean > 0.0) out.delta = (out.rates.back().rate - prior_mean) / prior_mean;
    return out;
}

struct RepeatedInvalidGroup {
    std::string normalized_title;
    int64_t paper_count = 0;  // distinct papers
    std::set<std::string> venues;
};

/// Groups Invalid results by normalized title and reports titles that
/// recur across >= 2 distinct papers, most widespread first. `paper_venue`
/// may be empty when venue provenance is unavailable.
inline std::vector<RepeatedInvalidGroup> repeated_invalid_groups(
    const std::vector<VerificationResult>& results,
    const std::unordered_map<std::string, std::string>& paper_venue = {}) {
    std::map<std::string, std::set<std::string>> papers_by_title;
    for (const auto& r : results) {
        if (r.verdict.status != VerdictStatus::Invalid) continue;
        if (!r.reference.title) continue;
        const std::string nt = normalize_title(*r.reference.title);
        if (nt.empty()) continue;
        papers_by_title[nt].insert(r.raw.paper_id);
    }
    std::vector<RepeatedInvalidGroup> out;
    for (const auto& [title, papers] : papers_by_title) {
        if (papers.size() < 2) continue;
        RepeatedInvalidGroup g;
        g.normalized_title = title;
        g.paper_count = static_cast<int64_t>(papers.size());
        for (const auto& p : papers)
            if (auto it = paper_venue.find(p); it != paper_venue.end()) g.venues.insert(it->second);
        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end(), [](const RepeatedInvalidGroup& a,
                                         const RepeatedInvalidGroup& b) {
        if (a.paper_count != b.paper_count) return a.paper_count > b.paper_count;
        return a.normalized_title < b.normalized_title;
    });
    return out;
}

/// Multiset overlap: sum of per-element min counts over sum of max counts.
/// 1.0 when both multisets are empty. Artifact-defined metric.
inline double extended_jaccard(const std::vector<std::string>& a,
                               const std::vector<std::string>& b) {
    std::map<std::string, std::pair<int64_t, int64_t>> counts;
    for (const auto& t : a) ++counts[t].first;
    for (const auto& t : b) ++counts[t].second;
    int64_t num = 0, den = 0;
    for (const auto& [t, c] : counts) {
        num += std::min(c.first, c.second);
        den += std::max(c.first, c.second);
    }
    if (den == 0) return 1.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

/// Mean and sample stddev of pairwise set-Jaccard over all run pairs.
/// Artifact-defined metric.
inline std::pair<double, double> stability_score(
    const std::vector<std::set<std::string>>& runs) {
    if (runs.size() < 2) throw TooFewRuns("need at least 2 runs");
    std::vector<double> pairwise;
    for (size_t i = 0; i < runs.size(); ++i)
        for (size_t j = i + 1; j < runs.size(); ++j) {
            std::vector<std::string> inter, uni;
            std::set_intersection(runs[i].begin(), runs[i].end(), runs[j].begin(),
                                  runs[j].end(), std::back_inserter(inter));
            std::set_union(runs[i].begin(), runs[i].end(), runs[j].begin(), runs[j].end(),
                           std::back_inserter(uni));
            pairwise.push_back(uni.empty() ? 1.0
                                           : static_cast<double>(inter.size()) /
                                                 static_cast<double>(uni.size()));
        }
    double mean = 0.0;
    for (double v : pairwise) mean += v;
    mean /= static_cast<double>(pairwise.size());
    double ss = 0.0;
    for (double v : pairwise) ss += (v - mean) * (v - mean);
    const double sd = pairwise.size() > 1
                          ? std::sqrt(ss / static_cast<double>(pairwise.size() - 1))
                          : 0.0;
    return {mean, sd};
}

/// Cochran sample size with finite-population correction, rounded up.
/// Only the two-sided 95% and 99% levels are supported.
inline int64_t audit_sample_size(double confidence, double margin, int64_t population) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence");
    if (!(margin > 0.0 && margin < 1.0)) throw std::invalid_argument("margin");
    double z;
    if (std::abs(confidence - 0.95) < 1e-9) z = kZ95;
    else if (std::abs(confidence - 0.99) < 1e-9) z = 2.5758293035489004;
    else if (std::abs(confidence - 0.90) < 1e-9) z = 1.6448536269514722;
    else throw std::invalid_argument("unsupported confidence level");
    const double n0 = z * z * 0.25 / (margin * margin);
    double n = n0;
    if (population > 0)
        n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(population));
    auto result = static_cast<int64_t>(std::ceil(n - 1e-9));
    if (population > 0) result = std::min(result, population);
    return result;
}

}  // namespace citecheck
