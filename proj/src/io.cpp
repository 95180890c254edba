#include "mbnn/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "mbnn/errors.hpp"

namespace mbnn::io {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

/// PGM header scanner: whitespace-separated tokens with '#' comments.
class HeaderScanner {
public:
    HeaderScanner(std::string_view b, std::size_t pos) : b_(b), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    std::size_t last() const { return last_; }

    unsigned long number(const char* what) {
        skip();
        const std::size_t start = last_ = pos_;
        unsigned long v = 0;
        const auto r = std::from_chars(b_.data() + pos_, b_.data() + b_.size(), v);
        if (r.ec != std::errc() || r.ptr == b_.data() + pos_) {
            throw ParseError(start, std::string("expected ") + what);
        }
        pos_ = static_cast<std::size_t>(r.ptr - b_.data());
        return v;
    }

    void skip() {
        while (pos_ < b_.size()) {
            if (is_space(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    /// The single whitespace byte ending a binary header.
    void end_of_header() {
        if (pos_ >= b_.size() || !is_space(b_[pos_])) throw ParseError(pos_, "expected whitespace after maxval");
        ++pos_;
    }

private:
    std::string_view b_;
    std::size_t pos_ = 0;
    std::size_t last_ = 0;
};

}  // namespace

std::string encode_pgm(const GrayImage& img, PgmFormat format) {
    if (img.width == 0 || img.height == 0) throw DimensionError("image must be non-empty");
    if (img.maxval == 0 || img.maxval > 65535) throw ParameterError("maxval must be in [1, 65535]");
    if (img.pixels.size() != img.width * img.height) throw DimensionError("pixel count does not match the size");
    std::string out = format == PgmFormat::plain ? "P2\n" : "P5\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
    for (auto p : img.pixels)
        if (p > img.maxval) throw ParameterError("pixel value " + std::to_string(p) + " exceeds maxval");
    if (format == PgmFormat::plain) {
        for (std::size_t r = 0; r < img.height; ++r) {
            for (std::size_t c = 0; c < img.width; ++c) {
                if (c) out += ' ';
                out += std::to_string(img.at(r, c));
            }
            out += '\n';
        }
    } else if (img.maxval < 256) {
        for (auto p : img.pixels) out += static_cast<char>(p);
    } else {
        for (auto p : img.pixels) {
            out += static_cast<char>(p >> 8);
            out += static_cast<char>(p & 0xff);
        }
    }
    return out;
}

GrayImage decode_pgm(std::string_view b) {
    if (b.size() < 2 || b[0] != 'P' || (b[1] != '2' && b[1] != '5')) throw ParseError(0, "not a P2/P5 PGM file");
    const bool binary = b[1] == '5';
    HeaderScanner s(b, 2);
    GrayImage img;
    img.width = s.number("width");
    img.height = s.number("height");
    const unsigned long maxval = s.number("maxval");
    if (img.width == 0 || img.height == 0) throw ParseError(2, "image size must be positive");
    if (maxval == 0 || maxval > 65535) throw ParseError(s.last(), "maxval must be in [1, 65535]");
    img.maxval = static_cast<unsigned>(maxval);
    const std::size_t n = img.width * img.height;
    img.pixels.resize(n);
    if (binary) {
        s.end_of_header();
        const std::size_t start = s.pos();
        const std::size_t bps = img.maxval < 256 ? 1 : 2;
        if (b.size() - start < n * bps) throw ParseError(b.size(), "pixel data truncated");
        for (std::size_t i = 0; i < n; ++i) {
            const auto hi = static_cast<unsigned char>(b[start + i * bps]);
            img.pixels[i] = bps == 1 ? hi : static_cast<std::uint16_t>(hi << 8 | static_cast<unsigned char>(b[start + i * bps + 1]));
            if (img.pixels[i] > img.maxval) throw ParseError(start + i * bps, "pixel exceeds maxval");
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned long v = s.number("a pixel value");
            if (v > img.maxval) throw ParseError(s.last(), "pixel exceeds maxval");
            img.pixels[i] = static_cast<std::uint16_t>(v);
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img, PgmFormat format) {
    write_text(path, encode_pgm(img, format));
}

GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_text(path)); }

GrayImage quantize(const Tensor& image, double lo, double hi, unsigned maxval) {
    if (image.rank() != 2) throw DimensionError("image must be rank 2, got " + shape_string(image.shape()));
    if (!(hi > lo)) throw ParameterError("quantize range needs hi > lo");
    if (maxval == 0 || maxval > 65535) throw ParameterError("maxval must be in [1, 65535]");
    GrayImage img;
    img.height = image.rows();
    img.width = image.cols();
    img.maxval = maxval;
    img.pixels.resize(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double x = std::clamp((image[i] - lo) / (hi - lo), 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint16_t>(std::lround(x * maxval));
    }
    return img;
}

GrayImage quantize_auto(const Tensor& image, unsigned maxval) {
    const auto [mn, mx] = std::minmax_element(image.data().begin(), image.data().end());
    if (*mx > *mn) return quantize(image, *mn, *mx, maxval);
    return quantize(image, *mn, *mn + 1.0, maxval);
}

Tensor dequantize(const GrayImage& img, double lo, double hi) {
    Tensor t({img.height, img.width});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * img.pixels[i] / static_cast<double>(img.maxval);
    return t;
}

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

CsvTable::CsvTable(std::vector<std::string> header) : cols_(header.size()) {
    if (header.empty()) throw DimensionError("CSV header must have at least one column");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += csv_field(header[i]);
    }
    text_ += '\n';
}

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) {
        throw DimensionError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(cols_));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += csv_field(cells[i]);
    }
    text_ += '\n';
    ++rows_;
    return *this;
}

CsvTable& CsvTable::row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_double(v));
    return row(s);
}

std::string encode_matrix_csv(const Tensor& m) {
    if (m.rank() != 2) throw DimensionError("matrix CSV needs a rank-2 tensor");
    std::vector<std::string> header;
    for (std::size_t c = 0; c < m.cols(); ++c) header.push_back("c" + std::to_string(c));
    CsvTable t(header);
    std::vector<double> row(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] = m(r, c);
        t.row(row);
    }
    return t.text();
}

Tensor decode_matrix_csv(std::string_view text) {
    std::size_t pos = text.find('\n');
    if (pos == std::string_view::npos) throw ParseError(text.size(), "missing header row");
    const std::size_t cols = static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, ',')) + 1;
    std::vector<double> vals;
    std::size_t rows = 0;
    ++pos;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) throw ParseError(text.size(), "missing newline at end of row");
        std::size_t i = pos, count = 0;
        while (true) {
            const std::size_t comma = std::min(text.find(',', i), nl);
            double v = 0.0;
            const auto r = std::from_chars(text.data() + i, text.data() + comma, v);
            if (r.ec != std::errc() || r.ptr != text.data() + comma) throw ParseError(i, "expected a number");
            vals.push_back(v);
            ++count;
            if (comma == nl) break;
            i = comma + 1;
        }
        if (count != cols) {
            throw ParseError(pos, "row has " + std::to_string(count) + " cells, header has " + std::to_string(cols));
        }
        ++rows;
        pos = nl + 1;
    }
    if (rows == 0) throw ParseError(text.size(), "matrix CSV has no rows");
    Tensor t({rows, cols});
    std::copy(vals.begin(), vals.end(), t.data().begin());
    return t;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FileError("cannot write " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw FileError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

}  // namespace mbnn::io
