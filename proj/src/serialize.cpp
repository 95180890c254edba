#include "mbnn/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mbnn/errors.hpp"

namespace mbnn {

namespace {

constexpr std::string_view kMagic = "mbnn-state";

void check_name(const std::string& name) {
    if (name.empty() || name.find_first_of(" \t\r\n=") != std::string::npos) {
        throw ParameterError("name '" + name + "' must be non-empty without whitespace or '='");
    }
}

void put(std::string& out, double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

template <class E>
struct EnumName {
    E value;
    std::string_view name;
};

constexpr EnumName<LayerKind> kKinds[] = {{LayerKind::affine, "affine"},       {LayerKind::conv, "conv"},
                                          {LayerKind::pointwise, "pointwise"}, {LayerKind::diag_mask, "diag_mask"},
                                          {LayerKind::transform, "transform"}, {LayerKind::residual_add, "residual_add"}};
constexpr EnumName<Activation> kActs[] = {{Activation::identity, "identity"},
                                          {Activation::tanh, "tanh"},
                                          {Activation::sin, "sin"},
                                          {Activation::soft_threshold, "soft_threshold"}};
constexpr EnumName<TransformKind> kTransforms[] = {{TransformKind::fft, "fft"}, {TransformKind::haar, "haar"}};
constexpr EnumName<TransformDir> kDirs[] = {{TransformDir::forward, "forward"}, {TransformDir::adjoint, "adjoint"}};

template <class E, std::size_t N>
std::string_view name_of(const EnumName<E> (&table)[N], E v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    throw ContractError("unnamed enum value");
}

void write_layer(std::string& out, const Layer& l) {
    out += "layer kind=";
    out += name_of(kKinds, l.kind);
    out += " in=" + std::to_string(l.in) + " out=" + std::to_string(l.out);
    out += " weight=" + l.weight + " bias=" + l.bias;
    out += " rows=" + std::to_string(l.rows) + " cols=" + std::to_string(l.cols);
    out += " act=";
    out += name_of(kActs, l.act);
    out += " threshold=" + l.threshold + " log_threshold=" + (l.log_threshold ? "1" : "0");
    out += " threshold_value=";
    put(out, l.threshold_value);
    out += " transform=";
    out += name_of(kTransforms, l.transform);
    out += " dir=";
    out += name_of(kDirs, l.dir);
    out += " levels=" + std::to_string(l.levels) + " tap=" + std::to_string(l.tap);
    out += " tap_coef=";
    put(out, l.tap_coef);
    out += " self_coef=";
    put(out, l.self_coef);
    out += '\n';
}

// ---------------------------------------------------------------------------

struct Token {
    std::string_view text;
    std::size_t offset;
};

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    bool at_end() const { return pos_ >= text_.size(); }
    std::size_t pos() const { return pos_; }

    /// Next line split on single spaces.
    std::vector<Token> line(const char* expect) {
        if (at_end()) throw ParseError(pos_, std::string("unexpected end of input, expected ") + expect);
        const std::size_t nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) throw ParseError(text_.size(), "missing newline at end of input");
        if (nl == pos_) throw ParseError(pos_, std::string("empty line, expected ") + expect);
        std::vector<Token> toks;
        for (std::size_t i = pos_;;) {
            const std::size_t sp = std::min(text_.find(' ', i), nl);
            if (sp == i) throw ParseError(i, "empty token");
            toks.push_back({text_.substr(i, sp - i), i});
            if (sp == nl) break;
            i = sp + 1;
        }
        pos_ = nl + 1;
        return toks;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::uint64_t parse_uint(const Token& t, std::string_view v, std::size_t voff) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty()) {
        throw ParseError(voff, "expected an unsigned integer, got '" + std::string(t.text) + "'");
    }
    return out;
}

double parse_double(std::string_view v, std::size_t off) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty()) {
        throw ParseError(off, "expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

/// key=value token; returns the value and its offset.
std::pair<std::string_view, std::size_t> field(const Token& t, std::string_view key) {
    if (t.text.size() < key.size() + 1 || t.text.substr(0, key.size()) != key || t.text[key.size()] != '=') {
        throw ParseError(t.offset, "expected '" + std::string(key) + "=...', got '" + std::string(t.text) + "'");
    }
    return {t.text.substr(key.size() + 1), t.offset + key.size() + 1};
}

std::uint64_t uint_field(const Token& t, std::string_view key) {
    const auto [v, off] = field(t, key);
    return parse_uint(t, v, off);
}

double double_field(const Token& t, std::string_view key) {
    const auto [v, off] = field(t, key);
    return parse_double(v, off);
}

bool bool_field(const Token& t, std::string_view key) {
    const auto [v, off] = field(t, key);
    if (v == "0") return false;
    if (v == "1") return true;
    throw ParseError(off, "expected 0 or 1 for " + std::string(key));
}

template <class E, std::size_t N>
E enum_field(const Token& t, std::string_view key, const EnumName<E> (&table)[N]) {
    const auto [v, off] = field(t, key);
    for (const auto& e : table)
        if (e.name == v) return e.value;
    throw ParseError(off, "unknown " + std::string(key) + " '" + std::string(v) + "'");
}

void expect_count(const std::vector<Token>& toks, std::size_t n, const char* what) {
    if (toks.size() != n) {
        throw ParseError(toks.front().offset, std::string(what) + " record needs " + std::to_string(n) + " fields, got " +
                                                  std::to_string(toks.size()));
    }
}

Layer read_layer(Reader& in) {
    const auto t = in.line("a layer record");
    if (t[0].text != "layer") throw ParseError(t[0].offset, "expected a layer record");
    expect_count(t, 18, "layer");
    Layer l;
    l.kind = enum_field(t[1], "kind", kKinds);
    l.in = uint_field(t[2], "in");
    l.out = uint_field(t[3], "out");
    l.weight = field(t[4], "weight").first;
    l.bias = field(t[5], "bias").first;
    l.rows = uint_field(t[6], "rows");
    l.cols = uint_field(t[7], "cols");
    l.act = enum_field(t[8], "act", kActs);
    l.threshold = field(t[9], "threshold").first;
    l.log_threshold = bool_field(t[10], "log_threshold");
    l.threshold_value = double_field(t[11], "threshold_value");
    l.transform = enum_field(t[12], "transform", kTransforms);
    l.dir = enum_field(t[13], "dir", kDirs);
    l.levels = uint_field(t[14], "levels");
    l.tap = uint_field(t[15], "tap");
    l.tap_coef = double_field(t[16], "tap_coef");
    l.self_coef = double_field(t[17], "self_coef");
    return l;
}

Shape read_shape(const Token& t) {
    const auto [v, off] = field(t, "shape");
    Shape s;
    std::size_t i = 0;
    while (true) {
        const std::size_t x = v.find('x', i);
        const std::string_view part = v.substr(i, x == std::string_view::npos ? std::string_view::npos : x - i);
        const std::uint64_t d = parse_uint(t, part, off + i);
        if (d == 0) throw ParseError(off + i, "tensor extents must be positive");
        s.push_back(d);
        if (x == std::string_view::npos) break;
        i = x + 1;
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

const NetSpec& State::net(std::string_view name) const {
    for (const auto& [n, v] : nets)
        if (n == name) return v;
    throw IndexError("no net named '" + std::string(name) + "'");
}

const unfolded::UnfoldedNet& State::unfolded_net(std::string_view name) const {
    for (const auto& [n, v] : unfolded)
        if (n == name) return v;
    throw IndexError("no unfolded net named '" + std::string(name) + "'");
}

const ParamSet& State::param_set(std::string_view name) const {
    for (const auto& [n, v] : params)
        if (n == name) return v;
    throw IndexError("no parameter set named '" + std::string(name) + "'");
}

std::string serialize(const State& state) {
    std::string out = std::string(kMagic) + " " + std::to_string(kStateVersion) + "\n";
    for (const auto& [name, spec] : state.nets) {
        check_name(name);
        out += "net " + name + " input=" + std::to_string(spec.input_size) +
               " secondary=" + (spec.secondary ? std::to_string(*spec.secondary) : std::string("none")) +
               " layers=" + std::to_string(spec.layers.size()) + "\n";
        for (const Layer& l : spec.layers) {
            for (const std::string* s : {&l.weight, &l.bias, &l.threshold})
                if (!s->empty()) check_name(*s);
            write_layer(out, l);
        }
    }
    for (const auto& [name, u] : state.unfolded) {
        check_name(name);
        out += "unfolded " + name + " layers=" + std::to_string(u.layers) + " tied=" + (u.tied ? "1" : "0") +
               " n=" + std::to_string(u.n) + " m=" + std::to_string(u.m) + "\n";
    }
    for (const auto& [name, ps] : state.params) {
        check_name(name);
        out += "params " + name + " entries=" + std::to_string(ps.size()) + "\n";
        for (const auto& e : ps.entries()) {
            check_name(e.name);
            out += "tensor " + e.name + " trainable=" + (e.trainable ? "1" : "0") + " shape=";
            for (std::size_t i = 0; i < e.value.rank(); ++i) {
                if (i) out += 'x';
                out += std::to_string(e.value.shape()[i]);
            }
            out += '\n';
            for (std::size_t i = 0; i < e.value.size(); ++i) {
                if (i) out += ' ';
                put(out, e.value[i]);
            }
            out += '\n';
        }
    }
    out += "end\n";
    return out;
}

State deserialize(std::string_view text) {
    Reader in(text);
    {
        const auto h = in.line("the header");
        if (h.size() != 2 || h[0].text != kMagic) throw ParseError(0, "not an mbnn state file");
        std::uint64_t version = 0;
        const auto r = std::from_chars(h[1].text.data(), h[1].text.data() + h[1].text.size(), version);
        if (r.ec != std::errc() || r.ptr != h[1].text.data() + h[1].text.size()) {
            throw ParseError(h[1].offset, "malformed format version");
        }
        if (version != static_cast<std::uint64_t>(kStateVersion)) {
            throw MigrationError("state format version " + std::to_string(version) + " cannot be read by version " +
                                 std::to_string(kStateVersion));
        }
    }
    State s;
    while (true) {
        const auto t = in.line("a record or 'end'");
        const std::string_view kind = t[0].text;
        if (kind == "end") {
            expect_count(t, 1, "end");
            if (!in.at_end()) throw ParseError(in.pos(), "trailing data after 'end'");
            return s;
        }
        if (kind == "net") {
            expect_count(t, 5, "net");
            NetSpec spec;
            spec.input_size = uint_field(t[2], "input");
            const auto [sec, soff] = field(t[3], "secondary");
            if (sec != "none") spec.secondary = parse_uint(t[3], sec, soff);
            const std::uint64_t n = uint_field(t[4], "layers");
            for (std::uint64_t i = 0; i < n; ++i) spec.layers.push_back(read_layer(in));
            s.nets.emplace_back(std::string(t[1].text), std::move(spec));
        } else if (kind == "unfolded") {
            expect_count(t, 6, "unfolded");
            unfolded::UnfoldedNet u;
            u.layers = uint_field(t[2], "layers");
            u.tied = bool_field(t[3], "tied");
            u.n = uint_field(t[4], "n");
            u.m = uint_field(t[5], "m");
            s.unfolded.emplace_back(std::string(t[1].text), u);
        } else if (kind == "params") {
            expect_count(t, 3, "params");
            ParamSet ps;
            const std::uint64_t n = uint_field(t[2], "entries");
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto tt = in.line("a tensor record");
                if (tt[0].text != "tensor") throw ParseError(tt[0].offset, "expected a tensor record");
                expect_count(tt, 4, "tensor");
                const bool trainable = bool_field(tt[2], "trainable");
                Tensor value(read_shape(tt[3]));
                const auto vals = in.line("tensor values");
                if (vals.size() != value.size()) {
                    throw ParseError(vals.front().offset, "expected " + std::to_string(value.size()) + " values, got " +
                                                              std::to_string(vals.size()));
                }
                for (std::size_t k = 0; k < vals.size(); ++k) value[k] = parse_double(vals[k].text, vals[k].offset);
                const std::string name(tt[1].text);
                if (ps.contains(name)) throw ParseError(tt[1].offset, "duplicate tensor '" + name + "'");
                ps.add(name, std::move(value), trainable);
            }
            s.params.emplace_back(std::string(t[1].text), std::move(ps));
        } else {
            throw ParseError(t[0].offset, "unknown record '" + std::string(kind) + "'");
        }
    }
}

void save_state(const std::filesystem::path& path, const State& state) {
    const std::string text = serialize(state);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FileError("cannot write " + tmp.string());
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!f) throw FileError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw FileError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

State load_state(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize(ss.str());
}

}  // namespace mbnn
