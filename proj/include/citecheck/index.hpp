#pragma once
// Local bibliographic index built from a DBLP-style XML dump: streaming
// dump parser (plain or gzip), versioned on-disk store, and near-match
// title queries backed by a character-trigram token index.

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <streambuf>
#include <string>
#include <unordered_map>
#include <vector>

#include "citecheck/core.hpp"
#include "citecheck/normalize.hpp"

namespace citecheck {

struct MalformedDump : std::runtime_error {
    size_t position;  // byte offset in the (decompressed) dump
    MalformedDump(const std::string& what, size_t pos)
        : std::runtime_error(what + " at offset " + std::to_string(pos)), position(pos) {}
};
struct IndexUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexHandle {
    std::string path;
    uint64_t record_count = 0;
    int64_t built_at = 0;  // unix seconds
};

namespace detail {

// streambuf that inflates a gzip stream on the fly.
class GzipInputBuf : public std::streambuf {
  public:
    explicit GzipInputBuf(std::istream& src) : src_(src) {
        std::memset(&strm_, 0, sizeof strm_);
        if (inflateInit2(&strm_, 16 + MAX_WBITS) != Z_OK)
            throw IoFailure("zlib init failed");
    }
    ~GzipInputBuf() override { inflateEnd(&strm_); }

  protected:
    int_type underflow() override {
        if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
        if (done_) return traits_type::eof();
        strm_.next_out = reinterpret_cast<Bytef*>(out_);
        strm_.avail_out = sizeof out_;
        while (strm_.avail_out == sizeof out_) {
            if (strm_.avail_in == 0) {
                src_.read(in_, sizeof in_);
                strm_.next_in = reinterpret_cast<Bytef*>(in_);
                strm_.avail_in = static_cast<uInt>(src_.gcount());
                if (strm_.avail_in == 0) {
                    done_ = true;
                    throw IoFailure("truncated gzip stream");
                }
            }
            const int rc = inflate(&strm_, Z_NO_FLUSH);
            if (rc == Z_STREAM_END) {
                done_ = true;
                break;
            }
            if (rc != Z_OK) throw IoFailure("gzip decompression failed");
        }
        const auto n = sizeof out_ - strm_.avail_out;
        if (n == 0) return traits_type::eof();
        setg(out_, out_, out_ + n);
        return traits_type::to_int_type(*gptr());
    }

  private:
    std::istream& src_;
    z_stream strm_{};
    bool done_ = false;
    char in_[1 << 15];
    char out_[1 << 15];
};

// Minimal streaming XML reader, enough for DBLP-style dumps: elements,
// attributes, character data, comments, processing instructions, DOCTYPE
// with internal subset, character and common named entities.
class XmlReader {
  public:
    enum class Event { StartTag, EndTag, Text, Eof };

    explicit XmlReader(std::istream& in) : in_(in) {}

    size_t position() const { return pos_; }
    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }
    const std::vector<std::pair<std::string, std::string>>& attrs() const { return attrs_; }

    Event next() {
        text_.clear();
        // accumulate character data until markup
        while (true) {
            const int c = peek();
            if (c == EOF) {
                if (!text_.empty()) return Event::Text;
                return Event::Eof;
            }
            if (c == '<') {
                if (!text_.empty()) return Event::Text;
                return read_markup();
            }
            if (c == '&') append_entity(text_);
            else text_ += static_cast<char>(get());
        }
    }

  private:
    Event read_markup() {
        get();  // '<'
        int c = peek();
        if (c == '!') return read_bang();
        if (c == '?') {
            skip_until("?>");
            return next();
        }
        if (c == '/') {
            get();
            name_ = read_name();
            skip_ws();
            expect('>');
            return Event::EndTag;
        }
        name_ = read_name();
        attrs_.clear();
        while (true) {
            skip_ws();
            c = peek();
            if (c == EOF) fail("unexpected end of dump inside tag");
            if (c == '>') {
                get();
                return Event::StartTag;
            }
            if (c == '/') {
                get();
                expect('>');
                self_closed_ = true;
                return Event::StartTag;
            }
            std::string aname = read_name();
            skip_ws();
            expect('=');
            skip_ws();
            const int q = get();
            if (q != '"' && q != '\'') fail("expected quoted attribute value");
            std::string aval;
            while (true) {
                const int d = peek();
                if (d == EOF) fail("unterminated attribute value");
                if (d == q) {
                    get();
                    break;
                }
                if (d == '&') append_entity(aval);
                else aval += static_cast<char>(get());
            }
            attrs_.emplace_back(std::move(aname), std::move(aval));
        }
    }

    Event read_bang() {
        get();  // '!'
        if (peek() == '-') {
            expect('-');
            expect('-');
            skip_until("-->");
            return next();
        }
        // DOCTYPE, possibly with an internal subset
        int depth = 0;
        while (true) {
            const int c = get();
            if (c == EOF) fail("unterminated declaration");
            if (c == '[') ++depth;
            else if (c == ']') --depth;
            else if (c == '>' && depth == 0) break;
        }
        return next();
    }

    void append_entity(std::string& out) {
        get();  // '&'
        std::string name;
        while (true) {
            const int c = peek();
            if (c == EOF) fail("unterminated entity");
            if (c == ';') {
                get();
                break;
            }
            if (name.size() > 12) fail("unterminated entity");
            name += static_cast<char>(get());
        }
        if (name.empty()) fail("empty entity");
        if (name[0] == '#') {
            uint32_t cp = 0;
            try {
                cp = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                         ? static_cast<uint32_t>(std::stoul(name.substr(2), nullptr, 16))
                         : static_cast<uint32_t>(std::stoul(name.substr(1)));
            } catch (const std::exception&) {
                fail("bad character reference &" + name + ";");
            }
            encode_utf8(cp, out);
            return;
        }
        static const std::unordered_map<std::string, uint32_t> kNamed = {
            {"amp", '&'}, {"lt", '<'}, {"gt", '>'}, {"apos", '\''}, {"quot", '"'},
            {"nbsp", 0x00A0},
            // the accented-Latin entities DBLP uses
            {"agrave", 0xE0}, {"aacute", 0xE1}, {"acirc", 0xE2}, {"atilde", 0xE3},
            {"auml", 0xE4}, {"aring", 0xE5}, {"aelig", 0xE6}, {"ccedil", 0xE7},
            {"egrave", 0xE8}, {"eacute", 0xE9}, {"ecirc", 0xEA}, {"euml", 0xEB},
            {"igrave", 0xEC}, {"iacute", 0xED}, {"icirc", 0xEE}, {"iuml", 0xEF},
            {"ntilde", 0xF1}, {"ograve", 0xF2}, {"oacute", 0xF3}, {"ocirc", 0xF4},
            {"otilde", 0xF5}, {"ouml", 0xF6}, {"oslash", 0xF8}, {"ugrave", 0xF9},
            {"uacute", 0xFA}, {"ucirc", 0xFB}, {"uuml", 0xFC}, {"yacute", 0xFD},
            {"szlig", 0xDF}, {"thorn", 0xFE}, {"eth", 0xF0},
            {"Agrave", 0xC0}, {"Aacute", 0xC1}, {"Auml", 0xC4}, {"Aring", 0xC5},
            {"Ccedil", 0xC7}, {"Eacute", 0xC9}, {"Ouml", 0xD6}, {"Oslash", 0xD8},
            {"Uuml", 0xDC},
            {"times", 0xD7}, {"micro", 0xB5}, {"reg", 0xAE},
        };
        std::string lowered = name;
        const auto it = kNamed.count(name) ? kNamed.find(name)
                                           : (std::transform(lowered.begin(), lowered.end(),
                                                             lowered.begin(), ::tolower),
                                              kNamed.find(lowered));
        if (it != kNamed.end()) encode_utf8(it->second, out);
        else out += "&" + name + ";";  // unknown entity passes through verbatim
    }

    std::string read_name() {
        std::string n;
        while (true) {
            const int c = peek();
            if (c == EOF) fail("unexpected end of dump in name");
            if (std::isalnum(c) || c == '_' || c == '-' || c == ':' || c == '.')
                n += static_cast<char>(get());
            else break;
        }
        if (n.empty()) fail("expected a name");
        return n;
    }

    void skip_until(const char* terminator) {
        const size_t len = std::strlen(terminator);
        std::string window;
        while (true) {
            const int c = get();
            if (c == EOF) fail("unterminated markup");
            window += static_cast<char>(c);
            if (window.size() > len) window.erase(0, window.size() - len);
            if (window == terminator) return;
        }
    }

    void skip_ws() {
        int c = peek();
        while (c != EOF && std::isspace(static_cast<unsigned char>(c))) {
            get();
            c = peek();
        }
    }
    void expect(char c) {
        if (get() != c) fail(std::string("expected '") + c + "'");
    }
    int peek() { return in_.peek(); }
    int get() {
        const int c = in_.get();
        if (c != EOF) ++pos_;
        return c;
    }
    [[noreturn]] void fail(const std::string& what) { throw MalformedDump(what, pos_); }

    std::istream& in_;
    size_t pos_ = 0;
    std::string name_;
    std::string text_;
    std::vector<std::pair<std::string, std::string>> attrs_;

  public:
    // set by read_markup for <name/>; consumed by the caller
    bool consume_self_closed() {
        const bool v = self_closed_;
        self_closed_ = false;
        return v;
    }

  private:
    bool self_closed_ = false;
};

inline constexpr char kIndexMagic[4] = {'C', 'V', 'I', 'X'};
inline constexpr uint32_t kIndexVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoFailure("truncated index file");
    return v;
}
inline void write_str(std::ostream& out, const std::string& s) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_str(std::istream& in) {
    const auto n = read_pod<uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw IoFailure("truncated index file");
    return s;
}

inline void write_record(std::ostream& out, const BiblioRecord& r) {
    write_str(out, r.title);
    write_pod<uint32_t>(out, static_cast<uint32_t>(r.authors.size()));
    for (const auto& a : r.authors) write_str(out, a);
    write_pod<int32_t>(out, r.year.value_or(-1));
    write_str(out, r.venue.value_or(""));
    write_str(out, r.external_id.value_or(""));
}

inline BiblioRecord read_record(std::istream& in) {
    BiblioRecord r;
    r.title = read_str(in);
    const auto na = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < na; ++i) r.authors.push_back(read_str(in));
    const auto y = read_pod<int32_t>(in);
    if (y >= 0) r.year = y;
    if (auto v = read_str(in); !v.empty()) r.venue = v;
    if (auto k = read_str(in); !k.empty()) r.external_id = k;
    r.source = RecordSource::LocalIndex;
    return r;
}

}  // namespace detail

/// Streams a DBLP-style XML dump (plain or gzip) into the on-disk index
/// at `out_path`. One BiblioRecord per recognized publication element;
/// `www` entries are skipped.
inline IndexHandle build_index(std::istream& dump, const std::string& out_path) {
    std::unique_ptr<detail::GzipInputBuf> gz;
    std::unique_ptr<std::istream> unzipped;
    std::istream* in = &dump;
    if (dump.peek() == 0x1f) {  // gzip magic
        gz = std::make_unique<detail::GzipInputBuf>(dump);
        unzipped = std::make_unique<std::istream>(gz.get());
        in = unzipped.get();
    }

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open index for writing: " + out_path);
    out.write(detail::kIndexMagic, 4);
    detail::write_pod<uint32_t>(out, detail::kIndexVersion);
    const auto count_pos = out.tellp();
    detail::write_pod<uint64_t>(out, 0);  // patched after the scan
    const int64_t built_at = std::chrono::duration_cast<std::chrono::seconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
    detail::write_pod<int64_t>(out, built_at);

    static const std::vector<std::string> kPubElements = {
        "article", "inproceedings", "incollection", "proceedings",
        "book",    "phdthesis",     "mastersthesis"};

    detail::XmlReader xml(*in);
    uint64_t count = 0;
    std::vector<std::string> open;  // element stack
    BiblioRecord rec;
    std::string pub_kind;    // non-empty while inside a publication element
    std::string field_text;  // accumulates text of the current child field

    using Ev = detail::XmlReader::Event;
    while (true) {
        const Ev ev = xml.next();
        if (ev == Ev::Eof) break;
        if (ev == Ev::StartTag) {
            const std::string tag = xml.name();
            const bool self_closed = xml.consume_self_closed();
            if (pub_kind.empty() && open.size() == 1 &&
                std::find(kPubElements.begin(), kPubElements.end(), tag) != kPubElements.end()) {
                pub_kind = tag;
                rec = BiblioRecord{};
                for (const auto& [k, v] : xml.attrs())
                    if (k == "key") rec.external_id = v;
            } else if (!pub_kind.empty() && open.size() == 2) {
                field_text.clear();
            }
            if (!self_closed) open.push_back(tag);
            else if (!pub_kind.empty() && open.size() == 1 && tag == pub_kind) pub_kind.clear();
        } else if (ev == Ev::Text) {
            if (!pub_kind.empty() && open.size() >= 3) field_text += xml.text();
        } else {  // EndTag
            if (open.empty() || open.back() != xml.name())
                throw MalformedDump("mismatched end tag </" + xml.name() + ">", xml.position());
            const std::string tag = open.back();
            open.pop_back();
            if (!pub_kind.empty() && open.size() == 2) {
                // a direct child field of the publication element closed
                const std::string text = detail::trim(field_text);
                if (tag == "title") rec.title = text;
                else if (tag == "author" && !text.empty()) rec.authors.push_back(text);
                else if (tag == "year" && !text.empty()) {
                    try {
                        rec.year = std::stoi(text);
                    } catch (const std::exception&) {}
                } else if (tag == "journal" && pub_kind == "article" && !text.empty())
                    rec.venue = text;
                else if (tag == "booktitle" &&
                         (pub_kind == "inproceedings" || pub_kind == "incollection") &&
                         !text.empty())
                    rec.venue = text;
                field_text.clear();
            } else if (!pub_kind.empty() && open.size() == 1 && tag == pub_kind) {
                if (!rec.title.empty()) {
                    detail::write_record(out, rec);
                    ++count;
                }
                pub_kind.clear();
            }
        }
    }
    if (!open.empty())
        throw MalformedDump("unexpected end of dump inside <" + open.back() + ">",
                            xml.position());

    out.seekp(count_pos);
    detail::write_pod<uint64_t>(out, count);
    out.flush();
    if (!out) throw IoFailure("failed writing index: " + out_path);
    return IndexHandle{out_path, count, built_at};
}

inline IndexHandle build_index_from_file(const std::string& dump_path,
                                         const std::string& out_path) {
    std::ifstream in(dump_path, std::ios::binary);
    if (!in) throw IoFailure("cannot open dump: " + dump_path);
    return build_index(in, out_path);
}

/// Read-only query handle over a built index. Loads records and the
/// trigram token index into memory; queries are safe from any number of
/// concurrent tasks.
class BiblioIndex {
  public:
    static BiblioIndex open(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IndexUnavailable("cannot open index: " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, detail::kIndexMagic, 4) != 0)
            throw IndexUnavailable("not an index file: " + path);
        if (detail::read_pod<uint32_t>(in) != detail::kIndexVersion)
            throw IndexUnavailable("index version mismatch, rebuild required: " + path);
        BiblioIndex idx;
        idx.handle_.path = path;
        idx.handle_.record_count = detail::read_pod<uint64_t>(in);
        idx.handle_.built_at = detail::read_pod<int64_t>(in);
        idx.records_.reserve(idx.handle_.record_count);
        for (uint64_t i = 0; i < idx.handle_.record_count; ++i)
            idx.records_.push_back(detail::read_record(in));
        idx.build_token_index();
        return idx;
    }

    const IndexHandle& handle() const { return handle_; }
    size_t size() const { return records_.size(); }

    /// Up to k candidates ranked by normalized-title similarity; exact
    /// normalized hits rank first. Recall contract: any stored record with
    /// similarity >= 0.9 to the query appears when k >= 10.
    std::vector<BiblioRecord> query_by_title(const std::string& title, int k) const {
        if (k < 1) return {};
        const std::string q = normalize_title(title);
        std::vector<uint32_t> candidates = candidate_set(q);
        std::vector<std::pair<double, uint32_t>> scored;
        scored.reserve(candidates.size());
        for (const uint32_t i : candidates) {
            const double s = similarity(q, norm_titles_[i]);
            if (s >= 0.5) scored.emplace_back(s, i);  // floor below which candidates are noise
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<BiblioRecord> out;
        for (const auto& [s, i] : scored) {
            if (static_cast<int>(out.size()) >= k) break;
            out.push_back(records_[i]);
        }
        return out;
    }

    /// All record indexes surviving the trigram prefilter (exposed for the
    /// recall property check).
    std::vector<uint32_t> candidate_set(const std::string& normalized_query) const {
        const auto& q = normalized_query;
        std::vector<uint32_t> out;
        // exact normalized hits
        if (auto it = exact_.find(q); it != exact_.end())
            out.insert(out.end(), it->second.begin(), it->second.end());

        const auto q_tris = trigrams(q);
        std::unordered_map<uint32_t, uint32_t> shared;
        for (const auto& t : q_tris)
            if (auto it = postings_.find(t); it != postings_.end())
                for (const uint32_t i : it->second) ++shared[i];
        const auto lq = static_cast<double>(q.size());
        for (const auto& [i, n] : shared) {
            const double lr = static_cast<double>(norm_titles_[i].size());
            const double dmax = 0.1 * std::max(lq, lr);
            // each edit destroys at most 3 trigram types of the record
            if (static_cast<double>(n) >= static_cast<double>(tri_counts_[i]) - 3.0 * dmax)
                out.push_back(i);
        }
        // short titles have too few trigrams for the bound to bite; scan
        // the length-compatible window directly
        for (const auto& [len, i] : by_length_) {
            const double lr = static_cast<double>(len);
            const double dmax = 0.1 * std::max(lq, lr);
            if (lr > lq + dmax) break;
            if (lr + dmax < lq) continue;
            if (static_cast<double>(tri_counts_[i]) <= 3.0 * dmax + 1.0) out.push_back(i);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    const std::vector<BiblioRecord>& records() const { return records_; }
    const std::vector<std::string>& normalized_titles() const { return norm_titles_; }

  private:
    static std::vector<std::string> trigrams(const std::string& s) {
        std::vector<std::string> out;
        if (s.size() < 3) return out;
        out.reserve(s.size() - 2);
        for (size_t i = 0; i + 3 <= s.size(); ++i) out.push_back(s.substr(i, 3));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void build_token_index() {
        norm_titles_.reserve(records_.size());
        for (uint32_t i = 0; i < records_.size(); ++i) {
            norm_titles_.push_back(normalize_title(records_[i].title));
            const auto& nt = norm_titles_.back();
            exact_[nt].push_back(i);
            const auto tris = trigrams(nt);
            tri_counts_.push_back(static_cast<uint32_t>(tris.size()));
            for (const auto& t : tris) postings_[t].push_back(i);
            by_length_.emplace_back(static_cast<uint32_t>(nt.size()), i);
        }
        std::sort(by_length_.begin(), by_length_.end());
    }

    IndexHandle handle_;
    std::vector<BiblioRecord> records_;
    std::vector<std::string> norm_titles_;
    std::vector<uint32_t> tri_counts_;
    std::unordered_map<std::string, std::vector<uint32_t>> exact_;
    std::unordered_map<std::string, std::vector<uint32_t>> postings_;
    std::vector<std::pair<uint32_t, uint32_t>> by_length_;  // (norm length, record idx)
};

}  // namespace citecheck
