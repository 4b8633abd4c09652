// citecheck: verify bibliographic references against local and remote
// sources and report corpus-level integrity statistics.
//
// Exit codes: 0 success (findings are data, not errors), 1 usage or input
// error, 2 infrastructure failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "citecheck/analytics.hpp"
#include "citecheck/cascade.hpp"
#include "citecheck/csv.hpp"
#include "citecheck/http_clients.hpp"
#include "citecheck/index.hpp"
#include "citecheck/parse.hpp"

namespace fs = std::filesystem;
using namespace citecheck;

namespace {

int cmd_build_index(const std::string& dump_path, const std::string& out_path) {
    try {
        const IndexHandle handle = build_index_from_file(dump_path, out_path);
        std::cout << handle.record_count << " records" << std::endl;
        return 0;
    } catch (const MalformedDump& e) {
        std::cerr << "error: malformed dump: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

std::vector<ProviderConfig> load_providers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open providers file: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<ProviderConfig> out;
    for (const auto& p : j) {
        ProviderConfig cfg;
        cfg.name = p.value("name", "");
        cfg.kind = p.value("kind", "academic");
        cfg.endpoint = p.at("endpoint").get<std::string>();
        cfg.auth_env_var = p.value("auth_env_var", "");
        out.push_back(std::move(cfg));
    }
    return out;
}

std::vector<RawReference> gather_references(const std::string& input,
                                            const std::string& extract_endpoint) {
    std::vector<RawReference> refs;
    const fs::path p(input);
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_regular_file() && e.path().extension() == ".txt")
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto file_refs = read_reference_file(f.string(), f.stem().string());
            refs.insert(refs.end(), file_refs.begin(), file_refs.end());
        }
        return refs;
    }
    if (p.extension() == ".txt") return read_reference_file(input, p.stem().string());
    // anything else is a document for the extraction service
    if (extract_endpoint.empty())
        throw std::runtime_error(
            "non-text input requires --extract-endpoint (structured extraction service)");
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input: " + input);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    HttpExtractionClient client(extract_endpoint);
    return extract_references(bytes.str(), p.stem().string(), client).references;
}

struct VerifyOptions {
    std::string input;
    std::string index_path;
    std::string cache_path;
    std::string output = "results.csv";
    std::string providers_path;
    std::string extract_endpoint;
    std::string llm_endpoint;
    std::string llm_model = "qwen-flash";
    std::string llm_auth_env = "CITECHECK_LLM_API_KEY";
    double threshold = 0.9;
    int concurrency = 10;
    bool offline = false;
    bool resume = false;
};

int cmd_verify(const VerifyOptions& opt) {
    try {
        std::vector<RawReference> raws = gather_references(opt.input, opt.extract_endpoint);

        std::vector<BatchInput> inputs;
        inputs.reserve(raws.size());
        for (auto& raw : raws) {
            BatchInput item;
            item.raw = std::move(raw);
            try {
                item.parsed = parse_reference(item.raw);
            } catch (const ParseFailureError&) {}
            inputs.push_back(std::move(item));
        }

        CascadePolicy policy;
        policy.concurrency_limit = opt.concurrency;
        MatchConfig cfg;
        cfg.threshold = opt.threshold;

        std::unique_ptr<VerificationCache> cache;
        if (!opt.cache_path.empty()) cache = std::make_unique<VerificationCache>(opt.cache_path);
        std::optional<BiblioIndex> index;
        if (!opt.index_path.empty()) index = BiblioIndex::open(opt.index_path);

        std::vector<std::unique_ptr<HttpSearchProvider>> providers;
        SearchProvider* academic = nullptr;
        SearchProvider* web = nullptr;
        std::unique_ptr<HttpLlmClient> llm;
        if (!opt.offline) {
            if (!opt.providers_path.empty()) {
                for (auto& pc : load_providers(opt.providers_path)) {
                    providers.push_back(std::make_unique<HttpSearchProvider>(pc));
                    if (pc.kind == "websearch" && !web) web = providers.back().get();
                    if (pc.kind == "academic" && !academic) academic = providers.back().get();
                }
            }
            if (!opt.llm_endpoint.empty())
                llm = std::make_unique<HttpLlmClient>(opt.llm_endpoint, opt.llm_model,
                                                      opt.llm_auth_env);
        }
        policy.enable_academic_db = academic != nullptr;
        policy.enable_web_search = web != nullptr;
        policy.enable_llm_reparse = llm != nullptr;

        CascadeDeps deps;
        deps.cache = cache.get();
        deps.index = index ? &*index : nullptr;
        deps.academic = academic;
        deps.web = web;
        deps.llm = llm.get();

        DoneSet done;
        if (opt.resume) done = exported_pairs(opt.output);
        const bool append = opt.resume && !done.empty();
        std::ofstream out(opt.output,
                          std::ios::binary | (append ? std::ios::app : std::ios::trunc));
        if (!out) throw IoFailure("cannot open output: " + opt.output);
        if (!append) write_csv_header(out);

        size_t written = 0;
        size_t unavailable = 0;
        const size_t total = inputs.size() - std::min(inputs.size(), done.size());
        auto sink = [&](const VerificationResult& r) {
            write_csv_row(out, r);
            out.flush();
            if (r.notes.rfind("AllSourcesUnavailable", 0) == 0) ++unavailable;
            if (++written % 100 == 0)
                std::cerr << "processed " << written << "/" << total << std::endl;
        };
        run_batch(inputs, deps, policy, cfg, done, sink);
        std::cerr << "processed " << written << "/" << total << ", skipped "
                  << inputs.size() - written << std::endl;

        if (written > 0 && unavailable * 2 > written) {
            std::cerr << "error: sources unavailable for " << unavailable << "/" << written
                      << " references" << std::endl;
            return 2;
        }
        return 0;
    } catch (const StorageFailure& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

// paper_id,venue,year key file for the report joins
std::vector<GroupKey> load_paper_keys(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open papers file: " + path);
    std::vector<GroupKey> keys;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string paper_id, venue, year;
        if (!std::getline(ls, paper_id, ',') || !std::getline(ls, venue, ','))
            throw std::runtime_error("bad papers row " + std::to_string(row));
        std::getline(ls, year, ',');
        if (row == 1 && paper_id == "paper_id") continue;
        GroupKey k;
        k.paper_id = paper_id;
        k.venue = venue;
        k.year = year.empty() ? 0 : std::stoi(year);
        keys.push_back(std::move(k));
    }
    return keys;
}

int cmd_report(const std::string& results_path, const std::string& papers_path,
               const std::string& out_prefix) {
    std::vector<VerificationResult> results;
    try {
        results = parse_csv_file(results_path);
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    try {
        const CorpusStats stats = corpus_stats(results);
        nlohmann::json summary = {
            {"total_refs", stats.total_refs},
            {"parsed_refs", stats.parsed_refs},
            {"valid", stats.valid},
            {"invalid", stats.invalid},
            {"non_academic", stats.non_academic},
            {"parse_failures", stats.parse_failures},
            {"rate_invalid", stats.rate_invalid},
            {"ci95_margin_pp_binomial", stats.ci95_margin},
            {"metric_notes", "stability and extended Jaccard are artifact-defined metrics"},
        };

        std::unordered_map<std::string, std::string> paper_venue;
        if (!papers_path.empty()) {
            const auto keys = load_paper_keys(papers_path);
            for (const auto& k : keys) paper_venue[*k.paper_id] = k.venue;

            const auto venue_rows = aggregate(results, keys);
            std::ofstream vout(out_prefix + "_venues.csv", std::ios::trunc);
            vout << "venue,error_count,ghost_count,invalid_count,papers_with_invalid,"
                    "total_papers,rate\n";
            std::vector<double> cluster_rates;
            for (const auto& r : venue_rows) {
                vout << detail::csv_field(r.venue) << ',' << r.error_count << ','
                     << r.ghost_count << ',' << r.invalid_count << ',' << r.papers_with_invalid
                     << ',' << r.total_papers << ',' << r.rate << '\n';
                cluster_rates.push_back(r.rate);
            }
            if (cluster_rates.size() >= 2)
                summary["ci95_margin_pp_cluster"] = ci95_cluster(cluster_rates) * 100.0;

            // yearly trend over papers with at least one invalid citation
            std::map<int, std::pair<std::set<std::string>, std::set<std::string>>> yearly;
            std::unordered_map<std::string, int> paper_year;
            for (const auto& k : keys)
                if (k.year > 0) paper_year[*k.paper_id] = k.year;
            for (const auto& [pid, year] : paper_year) yearly[year].first.insert(pid);
            for (const auto& r : results)
                if (r.verdict.status == VerdictStatus::Invalid)
                    if (auto it = paper_year.find(r.raw.paper_id); it != paper_year.end())
                        yearly[it->second].second.insert(r.raw.paper_id);
            std::vector<YearCount> per_year;
            for (const auto& [year, sets] : yearly)
                per_year.push_back({year, static_cast<int64_t>(sets.first.size()),
                                    static_cast<int64_t>(sets.second.size())});
            try {
                const TrendResult trend = temporal_trend(per_year);
                std::ofstream tout(out_prefix + "_trend.csv", std::ios::trunc);
                tout << "year,rate\n";
                for (const auto& yr : trend.rates) tout << yr.year << ',' << yr.rate << '\n';
                summary["trend_delta"] = trend.delta;
            } catch (const InsufficientYears&) {
                std::cerr << "trend: InsufficientYears (need at least 2 years)" << std::endl;
            }
        }

        const auto repeated = repeated_invalid_groups(results, paper_venue);
        std::ofstream rout(out_prefix + "_repeated.csv", std::ios::trunc);
        rout << "normalized_title,paper_count,venues\n";
        for (const auto& g : repeated) {
            std::string venues;
            for (const auto& v : g.venues) {
                if (!venues.empty()) venues += "; ";
                venues += v;
            }
            rout << detail::csv_field(g.normalized_title) << ',' << g.paper_count << ','
                 << detail::csv_field(venues) << '\n';
        }

        std::ofstream sout(out_prefix + "_summary.json", std::ios::trunc);
        sout << summary.dump(2) << '\n';
        std::cerr << "report written to " << out_prefix << "_*.{csv,json}" << std::endl;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

std::vector<double> load_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open score file: " + path);
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(std::stod(t));
    }
    return out;
}

int cmd_calibrate(const std::string& valid_path, const std::string& invalid_path,
                  const std::string& out_path) {
    try {
        const auto valid = load_scores(valid_path);
        const auto invalid = load_scores(invalid_path);
        std::vector<double> grid;
        for (int i = 50; i <= 100; ++i) grid.push_back(i / 100.0);
        const auto rows = threshold_sweep(valid, invalid, grid);
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoFailure("cannot open output: " + out_path);
        out << "theta,frac_valid_at_or_below,frac_invalid_at_or_below\n";
        for (const auto& r : rows)
            out << r.theta << ',' << r.frac_valid_at_or_below << ','
                << r.frac_invalid_at_or_below << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

int cmd_audit(const std::string& results_path, double confidence, double margin,
              bool paper_parity, const std::string& out_path, unsigned seed) {
    try {
        const auto results = parse_csv_file(results_path);
        std::vector<const VerificationResult*> valid_pool;
        for (const auto& r : results)
            if (r.verdict.status == VerdictStatus::Valid) valid_pool.push_back(&r);
        int64_t n = audit_sample_size(confidence, margin,
                                      static_cast<int64_t>(valid_pool.size()));
        if (paper_parity) n = std::max<int64_t>(n, 400);
        n = std::min<int64_t>(n, static_cast<int64_t>(valid_pool.size()));
        std::cerr << "valid pool " << valid_pool.size() << ", sampling " << n << std::endl;

        std::mt19937 rng(seed);
        std::shuffle(valid_pool.begin(), valid_pool.end(), rng);
        std::vector<VerificationResult> sample;
        for (int64_t i = 0; i < n; ++i) sample.push_back(*valid_pool[i]);
        export_csv(sample, out_path);
        std::cout << n << " sampled" << std::endl;
        return 0;
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"citation verification engine"};
    app.require_subcommand(1);
    app.set_config("--config", "", "configuration file (TOML/INI key-value format)");

    auto* build = app.add_subcommand("build-index", "build a local index from a DBLP-style XML dump");
    std::string dump_path, index_out;
    build->add_option("dump", dump_path, "XML dump path (plain or .gz)")->required();
    build->add_option("out", index_out, "output index path")->required();

    auto* verify = app.add_subcommand("verify", "verify references and export a results CSV");
    VerifyOptions vopt;
    verify->add_option("--input", vopt.input,
                       "reference .txt file, directory of .txt files, or a document")
        ->required();
    verify->add_option("--index", vopt.index_path, "local index path");
    verify->add_option("--cache", vopt.cache_path, "verification cache path");
    verify->add_option("--output", vopt.output, "results CSV path");
    verify->add_option("--threshold", vopt.threshold, "classification threshold theta");
    verify->add_option("--concurrency", vopt.concurrency, "max in-flight remote operations");
    verify->add_option("--providers", vopt.providers_path, "providers JSON config");
    verify->add_option("--extract-endpoint", vopt.extract_endpoint,
                       "structured extraction service endpoint");
    verify->add_option("--llm-endpoint", vopt.llm_endpoint, "LLM reparse endpoint");
    verify->add_option("--llm-model", vopt.llm_model, "LLM model name");
    verify->add_option("--llm-auth-env", vopt.llm_auth_env,
                       "environment variable holding the LLM API key");
    verify->add_flag("--offline", vopt.offline, "disable all remote stages");
    verify->add_flag("--resume", vopt.resume, "skip references already in the output CSV");

    auto* report = app.add_subcommand("report", "aggregate statistics from a results CSV");
    std::string results_path, papers_path, out_prefix = "report";
    report->add_option("results", results_path, "results CSV")->required();
    report->add_option("--papers", papers_path, "paper_id,venue,year join file");
    report->add_option("--out-prefix", out_prefix, "output file prefix");

    auto* calibrate = app.add_subcommand("calibrate", "threshold sweep over two labeled score files");
    std::string valid_scores, invalid_scores, sweep_out = "sweep.csv";
    calibrate->add_option("--valid", valid_scores, "scores of known-real titles")->required();
    calibrate->add_option("--invalid", invalid_scores, "scores of known-fabricated titles")
        ->required();
    calibrate->add_option("--output", sweep_out, "sweep table output");

    auto* audit = app.add_subcommand("audit", "sample the valid pool for manual review");
    std::string audit_results, audit_out = "audit_sample.csv";
    double confidence = 0.95, margin = 0.05;
    bool paper_parity = false;
    unsigned seed = 42;
    audit->add_option("results", audit_results, "results CSV")->required();
    audit->add_option("--confidence", confidence, "confidence level");
    audit->add_option("--margin", margin, "margin of error");
    audit->add_flag("--paper-parity", paper_parity, "floor the sample size at 400");
    audit->add_option("--output", audit_out, "sample CSV path");
    audit->add_option("--seed", seed, "sampling seed");

    CLI11_PARSE(app, argc, argv);

    if (build->parsed()) return cmd_build_index(dump_path, index_out);
    if (verify->parsed()) return cmd_verify(vopt);
    if (report->parsed()) return cmd_report(results_path, papers_path, out_prefix);
    if (calibrate->parsed()) return cmd_calibrate(valid_scores, invalid_scores, sweep_out);
    if (audit->parsed()) return cmd_audit(audit_results, confidence, margin, paper_parity,
                                          audit_out, seed);
    return 1;
}
