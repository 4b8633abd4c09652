#pragma once
// Persistent verification cache keyed by normalized title, backed by an
// embedded single-file SQLite store.

#include <sqlite3.h>

#include <chrono>
#include <ctime>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "citecheck/core.hpp"

namespace citecheck {

struct StorageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CacheEntry {
    std::string key;  // normalize_title of the originating title
    VerdictStatus result_status = VerdictStatus::Invalid;  // Valid or Invalid only
    std::optional<BiblioRecord> matched;
    std::optional<double> best_similarity;
    int64_t stored_at = 0;  // unix seconds
};

namespace detail {

inline std::string iso8601(int64_t unix_seconds) {
    std::time_t t = static_cast<std::time_t>(unix_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline int64_t from_iso8601(const std::string& s) {
    std::tm tm{};
    if (strptime(s.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm) == nullptr) return 0;
    return static_cast<int64_t>(timegm(&tm));
}

}  // namespace detail

/// Last-writer-wins key/value store over the cache schema. Writes are
/// serialized internally; reads are safe from concurrent tasks.
class VerificationCache {
  public:
    explicit VerificationCache(const std::string& path) {
        if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK)
            throw StorageFailure("cannot open cache: " + path);
        exec("PRAGMA journal_mode=WAL;");
        exec("CREATE TABLE IF NOT EXISTS cache ("
             "key TEXT PRIMARY KEY, status TEXT, matched_title TEXT, "
             "matched_authors TEXT, matched_year INT, matched_venue TEXT, "
             "similarity REAL, stored_at TEXT);");
    }
    ~VerificationCache() {
        if (db_) sqlite3_close(db_);
    }
    VerificationCache(const VerificationCache&) = delete;
    VerificationCache& operator=(const VerificationCache&) = delete;

    void put(const CacheEntry& entry) {
        std::lock_guard lock(mu_);
        sqlite3_stmt* st = prepare(
            "INSERT OR REPLACE INTO cache (key, status, matched_title, matched_authors, "
            "matched_year, matched_venue, similarity, stored_at) VALUES (?,?,?,?,?,?,?,?);");
        sqlite3_bind_text(st, 1, entry.key.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st, 2, to_string(entry.result_status), -1, SQLITE_STATIC);
        if (entry.matched) {
            sqlite3_bind_text(st, 3, entry.matched->title.c_str(), -1, SQLITE_TRANSIENT);
            const std::string authors = detail::join_authors(entry.matched->authors);
            sqlite3_bind_text(st, 4, authors.c_str(), -1, SQLITE_TRANSIENT);
            if (entry.matched->year) sqlite3_bind_int(st, 5, *entry.matched->year);
            else sqlite3_bind_null(st, 5);
            if (entry.matched->venue)
                sqlite3_bind_text(st, 6, entry.matched->venue->c_str(), -1, SQLITE_TRANSIENT);
            else sqlite3_bind_null(st, 6);
        } else {
            for (int i = 3; i <= 6; ++i) sqlite3_bind_null(st, i);
        }
        if (entry.best_similarity) sqlite3_bind_double(st, 7, *entry.best_similarity);
        else sqlite3_bind_null(st, 7);
        const std::string ts = detail::iso8601(entry.stored_at);
        sqlite3_bind_text(st, 8, ts.c_str(), -1, SQLITE_TRANSIENT);
        step_done(st);
    }

    std::optional<CacheEntry> get(const std::string& key) const {
        std::lock_guard lock(mu_);
        sqlite3_stmt* st = prepare(
            "SELECT key, status, matched_title, matched_authors, matched_year, "
            "matched_venue, similarity, stored_at FROM cache WHERE key = ?;");
        sqlite3_bind_text(st, 1, key.c_str(), -1, SQLITE_TRANSIENT);
        const int rc = sqlite3_step(st);
        if (rc == SQLITE_DONE) {
            sqlite3_finalize(st);
            return std::nullopt;
        }
        if (rc != SQLITE_ROW) {
            sqlite3_finalize(st);
            throw StorageFailure("cache read failed");
        }
        CacheEntry e;
        e.key = col_text(st, 0);
        e.result_status =
            col_text(st, 1) == "Valid" ? VerdictStatus::Valid : VerdictStatus::Invalid;
        if (sqlite3_column_type(st, 2) != SQLITE_NULL) {
            BiblioRecord r;
            r.title = col_text(st, 2);
            r.authors = detail::split_authors_field(col_text(st, 3));
            if (sqlite3_column_type(st, 4) != SQLITE_NULL) r.year = sqlite3_column_int(st, 4);
            if (sqlite3_column_type(st, 5) != SQLITE_NULL) r.venue = col_text(st, 5);
            r.source = RecordSource::Cache;
            e.matched = std::move(r);
        }
        if (sqlite3_column_type(st, 6) != SQLITE_NULL)
            e.best_similarity = sqlite3_column_double(st, 6);
        e.stored_at = detail::from_iso8601(col_text(st, 7));
        sqlite3_finalize(st);
        return e;
    }

    int64_t count() const {
        std::lock_guard lock(mu_);
        sqlite3_stmt* st = prepare("SELECT COUNT(*) FROM cache;");
        sqlite3_step(st);
        const int64_t n = sqlite3_column_int64(st, 0);
        sqlite3_finalize(st);
        return n;
    }

  private:
    void exec(const char* sql) {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            const std::string what = err ? err : "sqlite error";
            sqlite3_free(err);
            throw StorageFailure(what);
        }
    }
    sqlite3_stmt* prepare(const char* sql) const {
        sqlite3_stmt* st = nullptr;
        if (sqlite3_prepare_v2(db_, sql, -1, &st, nullptr) != SQLITE_OK)
            throw StorageFailure(sqlite3_errmsg(db_));
        return st;
    }
    void step_done(sqlite3_stmt* st) {
        const int rc = sqlite3_step(st);
        sqlite3_finalize(st);
        if (rc != SQLITE_DONE) throw StorageFailure(sqlite3_errmsg(db_));
    }
    static std::string col_text(sqlite3_stmt* st, int col) {
        const auto* p = sqlite3_column_text(st, col);
        return p ? reinterpret_cast<const char*>(p) : "";
    }

    sqlite3* db_ = nullptr;
    mutable std::mutex mu_;
};

inline int64_t now_unix_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace citecheck
