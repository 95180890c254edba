#include "mbnn/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "mbnn/errors.hpp"

namespace mbnn::config {

namespace {

std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

bool is_bare(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

struct KeyPart {
    std::string name;
    std::size_t offset;
};

class Parser {
public:
    explicit Parser(std::string_view t) : t_(t) {}

    Value document() {
        Value root;
        Value* current = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) return root;
            if (peek() == '[') {
                const std::size_t at = pos_;
                ++pos_;
                if (peek() == '[') throw ParseError(at, "arrays of tables are not supported");
                skip_ws();
                const auto key = dotted_key();
                skip_ws();
                expect(']');
                end_of_line();
                std::string full;
                for (const auto& k : key) full += (full.empty() ? "" : ".") + k.name;
                if (!headers_.insert(full).second) throw ParseError(at, "table [" + full + "] defined twice");
                current = &root;
                for (const auto& k : key) current = descend(*current, k);
            } else {
                key_value(*current);
                end_of_line();
            }
        }
    }

private:
    bool eof() const { return pos_ >= t_.size(); }
    char peek() const { return eof() ? '\0' : t_[pos_]; }

    void skip_ws() {
        while (!eof() && (t_[pos_] == ' ' || t_[pos_] == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && t_[pos_] != '\n') ++pos_;
    }

    /// Whitespace, comments and newlines (inside arrays and between statements).
    void skip_blank_lines() {
        while (true) {
            skip_ws();
            skip_comment();
            if (peek() == '\n') {
                ++pos_;
            } else if (peek() == '\r' && pos_ + 1 < t_.size() && t_[pos_ + 1] == '\n') {
                pos_ += 2;
            } else {
                return;
            }
        }
    }

    void end_of_line() {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r' && pos_ + 1 < t_.size() && t_[pos_ + 1] == '\n') {
            pos_ += 2;
            return;
        }
        if (peek() != '\n') throw ParseError(pos_, std::string("unexpected '") + peek() + "' after value");
        ++pos_;
    }

    void expect(char c) {
        if (peek() != c) throw ParseError(pos_, std::string("expected '") + c + "'");
        ++pos_;
    }

    KeyPart simple_key() {
        const std::size_t at = pos_;
        if (peek() == '"') return {basic_string(), at};
        if (peek() == '\'') return {literal_string(), at};
        while (!eof() && is_bare(t_[pos_])) ++pos_;
        if (pos_ == at) throw ParseError(at, "expected a key");
        return {std::string(t_.substr(at, pos_ - at)), at};
    }

    std::vector<KeyPart> dotted_key() {
        std::vector<KeyPart> parts{simple_key()};
        while (true) {
            skip_ws();
            if (peek() != '.') return parts;
            ++pos_;
            skip_ws();
            parts.push_back(simple_key());
        }
    }

    static Value* descend(Value& table, const KeyPart& k) {
        Value* v = table.find(k.name);
        if (!v) {
            table.table.emplace_back(k.name, Value{});
            return &table.table.back().second;
        }
        if (v->kind != Value::Kind::table) throw ParseError(k.offset, "key '" + k.name + "' is not a table");
        return v;
    }

    void key_value(Value& table) {
        const auto key = dotted_key();
        skip_ws();
        expect('=');
        skip_ws();
        Value* target = &table;
        for (std::size_t i = 0; i + 1 < key.size(); ++i) target = descend(*target, key[i]);
        const KeyPart& last = key.back();
        if (target->find(last.name)) throw ParseError(last.offset, "duplicate key '" + last.name + "'");
        Value v = value();
        target->table.emplace_back(last.name, std::move(v));
    }

    Value value() {
        Value v;
        const char c = peek();
        if (c == '"') {
            v.kind = Value::Kind::string;
            v.s = basic_string();
        } else if (c == '\'') {
            v.kind = Value::Kind::string;
            v.s = literal_string();
        } else if (c == '[') {
            v.kind = Value::Kind::array;
            ++pos_;
            while (true) {
                skip_blank_lines();
                if (peek() == ']') break;
                v.array.push_back(value());
                skip_blank_lines();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() != ']') throw ParseError(pos_, "expected ',' or ']' in array");
            }
            ++pos_;
        } else if (c == '{') {
            v.kind = Value::Kind::table;
            ++pos_;
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                return v;
            }
            while (true) {
                skip_ws();
                key_value(v);
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                expect('}');
                break;
            }
        } else if (t_.substr(pos_, 4) == "true" && !is_bare(pos_ + 4 < t_.size() ? t_[pos_ + 4] : ' ')) {
            v.kind = Value::Kind::boolean;
            v.b = true;
            pos_ += 4;
        } else if (t_.substr(pos_, 5) == "false" && !is_bare(pos_ + 5 < t_.size() ? t_[pos_ + 5] : ' ')) {
            v.kind = Value::Kind::boolean;
            pos_ += 5;
        } else {
            number(v);
        }
        return v;
    }

    void number(Value& v) {
        const std::size_t at = pos_;
        while (!eof() && (is_bare(t_[pos_]) || t_[pos_] == '.' || t_[pos_] == '+')) ++pos_;
        std::string_view raw = t_.substr(at, pos_ - at);
        if (raw.empty()) throw ParseError(at, "expected a value");
        std::string_view body = raw;
        const bool neg = body.front() == '-';
        if (body.front() == '+' || body.front() == '-') body.remove_prefix(1);
        if (body == "inf" || body == "nan") {
            v.kind = Value::Kind::real;
            v.d = body == "inf" ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
            if (neg) v.d = -v.d;
            return;
        }
        std::string digits;
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (raw[k] != '_') {
                digits += raw[k];
                continue;
            }
            const bool ok = k > 0 && k + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[k - 1])) &&
                            std::isdigit(static_cast<unsigned char>(raw[k + 1]));
            if (!ok) throw ParseError(at + k, "misplaced '_' in number");
        }
        if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
        const char* b = digits.data();
        const char* e = b + digits.size();
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        if (is_float) {
            v.kind = Value::Kind::real;
            const auto r = std::from_chars(b, e, v.d);
            if (r.ec != std::errc() || r.ptr != e) throw ParseError(at, "malformed number '" + std::string(raw) + "'");
        } else {
            v.kind = Value::Kind::integer;
            const auto r = std::from_chars(b, e, v.i);
            if (r.ec == std::errc::result_out_of_range) throw ParseError(at, "integer out of range");
            if (r.ec != std::errc() || r.ptr != e) throw ParseError(at, "malformed value '" + std::string(raw) + "'");
        }
    }

    std::string basic_string() {
        const std::size_t at = pos_;
        if (t_.substr(pos_, 3) == "\"\"\"") throw ParseError(at, "multi-line strings are not supported");
        ++pos_;
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') throw ParseError(at, "unterminated string");
            const char c = t_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) throw ParseError(at, "unterminated string");
            const char e = t_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'b': out += '\b'; break;
                case 'f': out += '\f'; break;
                case 'n': out += '\n'; break;
                case 'r': out += '\r'; break;
                case 't': out += '\t'; break;
                case 'u':
                case 'U': {
                    const std::size_t len = e == 'u' ? 4 : 8;
                    std::uint32_t cp = 0;
                    const char* b = t_.data() + pos_;
                    const auto r = std::from_chars(b, b + std::min(len, t_.size() - pos_), cp, 16);
                    if (r.ec != std::errc() || r.ptr != b + len || cp > 0x10FFFF || (cp >= 0xD800 && cp < 0xE000)) {
                        throw ParseError(pos_, "invalid unicode escape");
                    }
                    append_utf8(out, cp);
                    pos_ += len;
                    break;
                }
                default: throw ParseError(pos_ - 1, std::string("invalid escape '\\") + e + "'");
            }
        }
    }

    std::string literal_string() {
        const std::size_t at = pos_++;
        const std::size_t end = t_.find_first_of("'\n", pos_);
        if (end == std::string_view::npos || t_[end] != '\'') throw ParseError(at, "unterminated string");
        std::string out(t_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }

    std::string_view t_;
    std::size_t pos_ = 0;
    std::set<std::string> headers_;
};

void collect_unused(const Value& table, const std::string& prefix, const std::set<std::string>& used,
                    std::vector<std::string>& out) {
    for (const auto& [k, v] : table.table) {
        const std::string path = prefix.empty() ? k : prefix + "." + k;
        if (v.kind == Value::Kind::table) {
            collect_unused(v, path, used, out);
        } else if (!used.count(path)) {
            out.push_back(path);
        }
    }
}

}  // namespace

const Value* Value::find(std::string_view key) const {
    for (const auto& [k, v] : table)
        if (k == key) return &v;
    return nullptr;
}

Value* Value::find(std::string_view key) {
    for (auto& [k, v] : table)
        if (k == key) return &v;
    return nullptr;
}

const char* to_string(Value::Kind kind) noexcept {
    switch (kind) {
        case Value::Kind::boolean: return "boolean";
        case Value::Kind::integer: return "integer";
        case Value::Kind::real: return "float";
        case Value::Kind::string: return "string";
        case Value::Kind::array: return "array";
        case Value::Kind::table: return "table";
    }
    return "?";
}

Value parse(std::string_view text) { return Parser(text).document(); }

bool Range::contains(double v) const {
    if (std::isnan(v)) return false;
    if (lo_open ? !(v > lo) : !(v >= lo)) return false;
    if (hi_open ? !(v < hi) : !(v <= hi)) return false;
    return true;
}

std::string Range::describe() const {
    return std::string(lo_open ? "(" : "[") + num(lo) + ", " + num(hi) + (hi_open ? ")" : "]");
}

// ---------------------------------------------------------------------------

Document::Document(Value root)
    : root_(std::make_shared<const Value>(std::move(root))), empty_(std::make_shared<const Value>()) {
    if (root_->kind != Value::Kind::table) throw ConfigError("configuration root must be a table");
}

void Document::check_unused() const {
    std::vector<std::string> unused;
    collect_unused(*root_, "", used_, unused);
    if (unused.empty()) return;
    std::string msg = "unknown config field";
    msg += unused.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unused.size(); ++i) msg += (i ? ", '" : "'") + unused[i] + "'";
    throw ConfigError(msg);
}

std::string Section::field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool Section::has(std::string_view key) const { return table_->find(key) != nullptr; }

const Value* Section::get(std::string_view key) const {
    const Value* v = table_->find(key);
    if (v) doc_->used_.insert(field(key));
    return v;
}

Section Section::section(std::string_view key) const {
    const Value* v = table_->find(key);
    if (!v) return Section(doc_, doc_->empty_.get(), field(key));
    if (v->kind != Value::Kind::table) {
        throw ConfigError("config field '" + field(key) + "' must be a table, got " + to_string(v->kind));
    }
    return Section(doc_, v, field(key));
}

double Section::real(std::string_view key, double fallback, Range range) const {
    const Value* v = get(key);
    double x = fallback;
    if (v) {
        if (v->kind == Value::Kind::integer) {
            x = static_cast<double>(v->i);
        } else if (v->kind == Value::Kind::real) {
            x = v->d;
        } else {
            throw ConfigError("config field '" + field(key) + "' must be a number, got " + to_string(v->kind));
        }
    }
    if (!range.contains(x)) {
        throw ConfigError("config field '" + field(key) + "' = " + num(x) + " is outside " + range.describe());
    }
    return x;
}

double Section::real(std::string_view key, Range range) const {
    if (!has(key)) throw ConfigError("config field '" + field(key) + "' is required");
    return real(key, 0.0, range);
}

std::int64_t Section::integer(std::string_view key, std::int64_t fallback, std::int64_t lo, std::int64_t hi) const {
    const Value* v = get(key);
    std::int64_t x = fallback;
    if (v) {
        if (v->kind != Value::Kind::integer) {
            throw ConfigError("config field '" + field(key) + "' must be an integer, got " + to_string(v->kind));
        }
        x = v->i;
    }
    if (x < lo || x > hi) {
        throw ConfigError("config field '" + field(key) + "' = " + std::to_string(x) + " is outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return x;
}

std::size_t Section::count(std::string_view key, std::size_t fallback, std::size_t lo, std::size_t hi) const {
    return static_cast<std::size_t>(integer(key, static_cast<std::int64_t>(fallback), static_cast<std::int64_t>(lo),
                                            static_cast<std::int64_t>(hi)));
}

std::uint64_t Section::seed(std::string_view key, std::uint64_t fallback) const {
    return static_cast<std::uint64_t>(integer(key, static_cast<std::int64_t>(fallback), 0,
                                              std::numeric_limits<std::int64_t>::max()));
}

bool Section::flag(std::string_view key, bool fallback) const {
    const Value* v = get(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::boolean) {
        throw ConfigError("config field '" + field(key) + "' must be a boolean, got " + to_string(v->kind));
    }
    return v->b;
}

std::string Section::text(std::string_view key, std::string fallback) const {
    const Value* v = get(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::string) {
        throw ConfigError("config field '" + field(key) + "' must be a string, got " + to_string(v->kind));
    }
    return v->s;
}

std::string Section::text(std::string_view key) const {
    if (!has(key)) throw ConfigError("config field '" + field(key) + "' is required");
    return text(key, "");
}

std::string Section::choice(std::string_view key, std::string fallback, const std::vector<std::string>& allowed) const {
    std::string s = text(key, std::move(fallback));
    for (const auto& a : allowed)
        if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("config field '" + field(key) + "' = '" + s + "' is not one of {" + list + "}");
}

std::vector<double> Section::reals(std::string_view key, std::vector<double> fallback, Range range) const {
    const Value* v = get(key);
    if (v) {
        if (v->kind != Value::Kind::array) {
            throw ConfigError("config field '" + field(key) + "' must be an array, got " + to_string(v->kind));
        }
        fallback.clear();
        for (const Value& e : v->array) {
            if (e.kind == Value::Kind::integer) {
                fallback.push_back(static_cast<double>(e.i));
            } else if (e.kind == Value::Kind::real) {
                fallback.push_back(e.d);
            } else {
                throw ConfigError("config field '" + field(key) + "' must hold numbers, got " + to_string(e.kind));
            }
        }
    }
    for (std::size_t i = 0; i < fallback.size(); ++i) {
        if (!range.contains(fallback[i])) {
            throw ConfigError("config field '" + field(key) + "[" + std::to_string(i) + "]' = " + num(fallback[i]) +
                              " is outside " + range.describe());
        }
    }
    return fallback;
}

std::vector<std::vector<double>> Section::rows(std::string_view key, std::vector<std::vector<double>> fallback,
                                               std::size_t width) const {
    const Value* v = get(key);
    if (v) {
        if (v->kind != Value::Kind::array) {
            throw ConfigError("config field '" + field(key) + "' must be an array of arrays, got " +
                              to_string(v->kind));
        }
        fallback.clear();
        for (const Value& row : v->array) {
            if (row.kind != Value::Kind::array) {
                throw ConfigError("config field '" + field(key) + "' must be an array of arrays");
            }
            std::vector<double> r;
            for (const Value& e : row.array) {
                if (e.kind == Value::Kind::integer) {
                    r.push_back(static_cast<double>(e.i));
                } else if (e.kind == Value::Kind::real) {
                    r.push_back(e.d);
                } else {
                    throw ConfigError("config field '" + field(key) + "' must hold numbers, got " + to_string(e.kind));
                }
            }
            fallback.push_back(std::move(r));
        }
    }
    for (std::size_t i = 0; i < fallback.size(); ++i) {
        const std::size_t w = width ? width : fallback.front().size();
        if (fallback[i].size() != w) {
            throw ConfigError("config field '" + field(key) + "[" + std::to_string(i) + "]' must have " +
                              std::to_string(w) + " entries, got " + std::to_string(fallback[i].size()));
        }
    }
    return fallback;
}

}  // namespace mbnn::config
