#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mbnn::config {

/// Parsed TOML value. Tables keep their keys in file order.
struct Value {
    enum class Kind { boolean, integer, real, string, array, table };

    Kind kind = Kind::table;
    bool b = false;
    std::int64_t i = 0;
    double d = 0.0;
    std::string s;
    std::vector<Value> array;
    std::vector<std::pair<std::string, Value>> table;

    const Value* find(std::string_view key) const;
    Value* find(std::string_view key);
};

const char* to_string(Value::Kind kind) noexcept;

/// Parses the TOML subset used by scene and experiment files: comments, [table]
/// headers, bare/quoted/dotted keys, basic and literal strings, integers,
/// floats (including inf/nan), booleans, multi-line nested arrays and inline
/// tables. Arrays of tables and date-times are not supported. Throws ParseError
/// with the byte offset of the problem.
Value parse(std::string_view text);

/// Closed or open bound on a real field, e.g. Range::open_closed(0, 1) for (0, 1].
struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false, hi_open = false;

    static Range any() { return {}; }
    static Range positive() { return {0.0, std::numeric_limits<double>::infinity(), true, false}; }
    static Range non_negative() { return {0.0, std::numeric_limits<double>::infinity(), false, false}; }
    static Range closed(double lo, double hi) { return {lo, hi, false, false}; }
    static Range open_closed(double lo, double hi) { return {lo, hi, true, false}; }

    bool contains(double v) const;
    std::string describe() const;
};

class Document;

/// View of one table of a Document. Every getter marks its key as consumed and
/// throws ConfigError naming the dotted field and the violated bound.
class Section {
public:
    const std::string& path() const noexcept { return path_; }
    bool has(std::string_view key) const;

    /// Sub-table; a missing key yields an empty section.
    Section section(std::string_view key) const;

    double real(std::string_view key, double fallback, Range range = Range::any()) const;
    double real(std::string_view key, Range range) const;  // required
    std::int64_t integer(std::string_view key, std::int64_t fallback, std::int64_t lo, std::int64_t hi) const;
    std::size_t count(std::string_view key, std::size_t fallback, std::size_t lo,
                      std::size_t hi = std::numeric_limits<std::int64_t>::max()) const;
    std::uint64_t seed(std::string_view key, std::uint64_t fallback) const;
    bool flag(std::string_view key, bool fallback) const;
    std::string text(std::string_view key, std::string fallback) const;
    std::string text(std::string_view key) const;  // required
    std::string choice(std::string_view key, std::string fallback, const std::vector<std::string>& allowed) const;
    std::vector<double> reals(std::string_view key, std::vector<double> fallback, Range range = Range::any()) const;
    /// Array of equal-length numeric rows; `width` 0 accepts any common width.
    std::vector<std::vector<double>> rows(std::string_view key, std::vector<std::vector<double>> fallback,
                                          std::size_t width = 0) const;

private:
    friend class Document;
    Section(const Document* doc, const Value* table, std::string path) : doc_(doc), table_(table), path_(std::move(path)) {}

    const Value* get(std::string_view key) const;
    std::string field(std::string_view key) const;

    const Document* doc_;
    const Value* table_;
    std::string path_;
};

/// Parsed configuration with key-usage tracking.
class Document {
public:
    explicit Document(Value root);
    static Document parse(std::string_view text) { return Document(config::parse(text)); }

    Section root() const { return Section(this, root_.get(), ""); }
    const Value& value() const noexcept { return *root_; }

    /// Throws ConfigError naming the first key no getter has read.
    void check_unused() const;

private:
    friend class Section;
    std::shared_ptr<const Value> root_;
    std::shared_ptr<const Value> empty_;
    mutable std::set<std::string> used_;
};

}  // namespace mbnn::config
