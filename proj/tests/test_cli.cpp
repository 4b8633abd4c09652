// End-to-end tests of the command-line binary. The path to the built
// binary arrives through the CITECHECK_BIN compile definition.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "citecheck/analytics.hpp"
#include "citecheck/csv.hpp"

using namespace citecheck;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CITECHECK_BIN) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "citecheck_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
    const auto path = work_dir() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return path.string();
}

size_t count_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    size_t lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line != "\r") ++lines;
    return lines;
}

const char* kDump =
    "<?xml version=\"1.0\"?><dblp>"
    "<article key=\"a1\"><author>Alex Brown</author>"
    "<title>Deep Residual Learning for Image Recognition</title>"
    "<year>2016</year><journal>Journal of Computer Vision</journal></article>"
    "<inproceedings key=\"c1\"><author>Dana White</author>"
    "<title>Attention Is All You Need</title>"
    "<year>2017</year><booktitle>NeurIPS</booktitle></inproceedings>"
    "<article key=\"a2\"><author>Sam Green</author>"
    "<title>A Stochastic Approximation Method</title>"
    "<year>1951</year><journal>Annals of Mathematical Statistics</journal></article>"
    "</dblp>";

std::string built_index() {
    const auto idx = (work_dir() / "cli.idx").string();
    const auto dump = write_file("dump.xml", kDump);
    const auto r = run_cli("build-index " + dump + " " + idx);
    REQUIRE(r.exit_code == 0);
    return idx;
}

}  // namespace

TEST_CASE("build-index prints the record count") {
    const auto dump = write_file("count.xml", kDump);
    const auto out = (work_dir() / "count.idx").string();
    const auto r = run_cli("build-index " + dump + " " + out);
    CHECK(r.exit_code == 0);
    CHECK(r.out == "3 records\n");
}

TEST_CASE("build-index rejects a malformed dump with exit code 1") {
    const auto dump = write_file("broken.xml", "<dblp><article><title>trunc");
    const auto r = run_cli("build-index " + dump + " " + (work_dir() / "broken.idx").string());
    CHECK(r.exit_code == 1);
}

TEST_CASE("offline verify classifies against the local index") {
    const auto idx = built_index();
    const auto refs = write_file(
        "refs.txt",
        "# three real, one fabricated, one web link, one unparseable\n"
        "Alex Brown. \"Deep Residual Learning for Image Recognition\". Journal of Computer "
        "Vision, 2016.\n"
        "Dana White. \"Attention Is All You Need\". NeurIPS, 2017.\n"
        "Sam Green. \"A Stochastic Approximation Method\". Annals of Mathematical Statistics, "
        "1951.\n"
        "Pat Blue. \"A Completely Fabricated Study of Nothing\". Imaginary Letters, 2021.\n"
        "The framework documentation. https://example.com/framework\n"
        "???\n");
    const auto out = (work_dir() / "results.csv").string();
    const auto r = run_cli("verify --input " + refs + " --index " + idx + " --offline --output " +
                           out);
    CHECK(r.exit_code == 0);

    const auto results = parse_csv_file(out);
    REQUIRE(results.size() == 6);
    CHECK(results[0].verdict.status == VerdictStatus::Valid);
    CHECK(results[0].diagnosing_strategy == Strategy::LocalIndex);
    CHECK(results[0].matched->title == "Deep Residual Learning for Image Recognition");
    CHECK(results[1].verdict.status == VerdictStatus::Valid);
    CHECK(results[2].verdict.status == VerdictStatus::Valid);
    CHECK(results[3].verdict.status == VerdictStatus::Invalid);
    CHECK(results[4].verdict.status == VerdictStatus::NonAcademic);
    CHECK(results[5].verdict.status == VerdictStatus::ParseFailure);
}

TEST_CASE("verify --resume skips references already exported") {
    const auto idx = built_index();
    const auto refs = write_file(
        "resume.txt",
        "Alex Brown. \"Deep Residual Learning for Image Recognition\". Journal of Computer "
        "Vision, 2016.\n"
        "Dana White. \"Attention Is All You Need\". NeurIPS, 2017.\n");
    const auto out = (work_dir() / "resume.csv").string();
    fs::remove(out);
    REQUIRE(run_cli("verify --input " + refs + " --index " + idx + " --offline --output " + out)
                .exit_code == 0);
    const auto first = count_lines(out);
    REQUIRE(run_cli("verify --input " + refs + " --index " + idx +
                    " --offline --resume --output " + out)
                .exit_code == 0);
    CHECK(count_lines(out) == first);  // no duplicated rows
    CHECK(parse_csv_file(out).size() == 2);
}

TEST_CASE("report writes summary JSON and aggregate CSVs") {
    const auto idx = built_index();
    const auto refs = write_file(
        "report_refs.txt",
        "Alex Brown. \"Deep Residual Learning for Image Recognition\". Journal of Computer "
        "Vision, 2016.\n"
        "Pat Blue. \"A Completely Fabricated Study of Nothing\". Imaginary Letters, 2021.\n");
    const auto results = (work_dir() / "report_results.csv").string();
    REQUIRE(run_cli("verify --input " + refs + " --index " + idx + " --offline --output " +
                    results)
                .exit_code == 0);

    const auto papers = write_file("papers.csv",
                                   "paper_id,venue,year\nreport_refs,SomeConf,2024\n");
    const auto prefix = (work_dir() / "rep").string();
    const auto r = run_cli("report " + results + " --papers " + papers + " --out-prefix " +
                           prefix);
    CHECK(r.exit_code == 0);

    std::ifstream summary(prefix + "_summary.json");
    REQUIRE(summary.good());
    std::stringstream buf;
    buf << summary.rdbuf();
    CHECK(buf.str().find("\"rate_invalid\": 0.5") != std::string::npos);
    CHECK(buf.str().find("\"invalid\": 1") != std::string::npos);
    CHECK(count_lines(prefix + "_venues.csv") == 2);  // header + SomeConf
    CHECK(fs::exists(prefix + "_repeated.csv"));
}

TEST_CASE("calibrate emits the full threshold grid") {
    const auto valid = write_file("valid_scores.txt", "0.95\n0.99\n1.0\n0.97\n");
    const auto invalid = write_file("invalid_scores.txt", "0.2\n0.4\n0.6\n0.55\n");
    const auto out = (work_dir() / "sweep.csv").string();
    const auto r =
        run_cli("calibrate --valid " + valid + " --invalid " + invalid + " --output " + out);
    CHECK(r.exit_code == 0);
    CHECK(count_lines(out) == 52);  // header + theta in {0.50 .. 1.00}
}

TEST_CASE("audit samples the valid pool, flooring at 400 under --paper-parity") {
    // 500 valid results is enough for both the Cochran size and the floor
    std::vector<VerificationResult> results;
    for (int i = 0; i < 500; ++i) {
        VerificationResult r;
        r.raw = {"ref " + std::to_string(i), "p" + std::to_string(i), 0};
        r.reference.title = "title " + std::to_string(i);
        r.verdict.status = VerdictStatus::Valid;
        r.best_similarity = 1.0;
        BiblioRecord m;
        m.title = "title " + std::to_string(i);
        r.matched = std::move(m);
        r.diagnosing_strategy = Strategy::LocalIndex;
        results.push_back(std::move(r));
    }
    const auto results_path = (work_dir() / "audit_in.csv").string();
    export_csv(results, results_path);

    const auto sample_path = (work_dir() / "audit_out.csv").string();
    const auto plain = run_cli("audit " + results_path + " --output " + sample_path);
    CHECK(plain.exit_code == 0);
    const auto expected = audit_sample_size(0.95, 0.05, 500);
    CHECK(plain.out == std::to_string(expected) + " sampled\n");
    CHECK(parse_csv_file(sample_path).size() == static_cast<size_t>(expected));

    const auto parity =
        run_cli("audit " + results_path + " --paper-parity --output " + sample_path);
    CHECK(parity.exit_code == 0);
    CHECK(parity.out == "400 sampled\n");
    CHECK(parse_csv_file(sample_path).size() == 400);
}
