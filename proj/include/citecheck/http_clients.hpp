#pragma once
// HTTP adapters for the extraction service, the LLM reparser and the
// named search providers. API keys come from environment variables named
// in the provider configuration; keys never live in config files.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "citecheck/cascade.hpp"
#include "citecheck/clients.hpp"
#include "citecheck/core.hpp"

namespace citecheck {

struct ProviderConfig {
    std::string name;
    std::string kind;  // "academic" or "websearch"
    std::string endpoint;  // e.g. http://host:port/search
    std::string auth_env_var;  // environment variable holding the API key
};

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {url, "/"};
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Headers auth_headers(const std::string& env_var) {
    httplib::Headers h;
    if (!env_var.empty()) {
        if (const char* key = std::getenv(env_var.c_str()))
            h.emplace("Authorization", std::string("Bearer ") + key);
    }
    return h;
}

}  // namespace detail

/// Searches a proxy-style endpoint: GET <endpoint>?q=<query>&k=<k>,
/// expecting {"results": [{"title", "authors", "year", "venue", "id"}]}.
class HttpSearchProvider final : public SearchProvider {
  public:
    explicit HttpSearchProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
        source_ = cfg_.kind == "websearch" ? RecordSource::WebSearch : RecordSource::AcademicDB;
    }

    std::vector<BiblioRecord> search(const std::string& query, int k) override {
        const auto url = detail::split_url(cfg_.endpoint);
        httplib::Client cli(url.origin);
        cli.set_read_timeout(30, 0);
        httplib::Params params{{"q", query}, {"k", std::to_string(k)}};
        const auto res = cli.Get(url.path, params, detail::auth_headers(cfg_.auth_env_var));
        if (!res) throw Timeout(cfg_.name + ": no response from " + cfg_.endpoint);
        if (res->status == 429) throw RateLimited(cfg_.name + ": rate limited");
        if (res->status != 200)
            throw ProviderError(cfg_.name + ": HTTP " + std::to_string(res->status));
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("results") || !j["results"].is_array())
            throw ProviderError(cfg_.name + ": malformed search response");
        std::vector<BiblioRecord> out;
        for (const auto& item : j["results"]) {
            if (!item.contains("title") || !item["title"].is_string()) continue;
            BiblioRecord r;
            r.title = item["title"].get<std::string>();
            if (r.title.empty()) continue;
            if (item.contains("authors") && item["authors"].is_array())
                for (const auto& a : item["authors"])
                    if (a.is_string()) r.authors.push_back(a.get<std::string>());
            if (item.contains("year") && item["year"].is_number_integer())
                r.year = item["year"].get<int>();
            if (item.contains("venue") && item["venue"].is_string())
                r.venue = item["venue"].get<std::string>();
            if (item.contains("id") && item["id"].is_string())
                r.external_id = item["id"].get<std::string>();
            r.source = source_;
            out.push_back(std::move(r));
            if (static_cast<int>(out.size()) >= k) break;
        }
        return out;
    }

  private:
    ProviderConfig cfg_;
    RecordSource source_;
};

/// Posts document bytes to the extraction service and reads back
/// {"references": ["...", ...]}.
class HttpExtractionClient final : public ExtractionClient {
  public:
    explicit HttpExtractionClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

    std::vector<std::string> extract(const std::string& doc_bytes) override {
        const auto url = detail::split_url(endpoint_);
        httplib::Client cli(url.origin);
        cli.set_read_timeout(120, 0);
        const auto res = cli.Post(url.path, doc_bytes, "application/octet-stream");
        if (!res) throw ServiceUnavailable("extraction service unreachable: " + endpoint_);
        if (res->status != 200)
            throw ServiceUnavailable("extraction service HTTP " + std::to_string(res->status));
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("references") || !j["references"].is_array())
            throw MalformedServiceResponse("extraction response lacks a references array");
        std::vector<std::string> out;
        for (const auto& r : j["references"]) {
            if (!r.is_string()) throw MalformedServiceResponse("non-string reference entry");
            out.push_back(r.get<std::string>());
        }
        return out;
    }

  private:
    std::string endpoint_;
};

/// Chat/completions-style LLM endpoint.
class HttpLlmClient final : public LlmClient {
  public:
    HttpLlmClient(std::string endpoint, std::string model, std::string auth_env_var)
        : endpoint_(std::move(endpoint)),
          model_(std::move(model)),
          auth_env_var_(std::move(auth_env_var)) {}

    std::string complete(const std::string& prompt) override {
        const auto url = detail::split_url(endpoint_);
        httplib::Client cli(url.origin);
        cli.set_read_timeout(120, 0);
        nlohmann::json body = {
            {"model", model_},
            {"messages", {{{"role", "user"}, {"content", prompt}}}},
            {"temperature", 0},
        };
        auto headers = detail::auth_headers(auth_env_var_);
        const auto res = cli.Post(url.path, headers, body.dump(), "application/json");
        if (!res) throw ProviderError("llm provider unreachable: " + endpoint_);
        if (res->status != 200)
            throw ProviderError("llm provider HTTP " + std::to_string(res->status));
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw ProviderError("llm provider returned non-JSON");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ProviderError("llm provider response missing choices[0].message.content");
        }
    }

  private:
    std::string endpoint_;
    std::string model_;
    std::string auth_env_var_;
};

}  // namespace citecheck
