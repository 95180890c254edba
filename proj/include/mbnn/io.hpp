#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mbnn/tensor.hpp"

namespace mbnn::io {

/// Grayscale image with integer samples in [0, maxval]; maxval <= 255 is
/// stored with 8-bit samples, larger values (up to 65535) with 16-bit big-endian samples.
struct GrayImage {
    std::size_t width = 0, height = 0;
    unsigned maxval = 255;
    std::vector<std::uint16_t> pixels;  ///< row-major, height * width

    std::uint16_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

enum class PgmFormat { plain, binary };  // P2, P5

std::string encode_pgm(const GrayImage& img, PgmFormat format = PgmFormat::binary);
/// Accepts P2 and P5 with '#' comments in the header. Throws ParseError.
GrayImage decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const GrayImage& img, PgmFormat format = PgmFormat::binary);
GrayImage read_pgm(const std::filesystem::path& path);

/// Linear map of [lo, hi] onto [0, maxval], clamped, rounded half away from zero.
GrayImage quantize(const Tensor& image, double lo, double hi, unsigned maxval = 255);
/// quantize over the image's own [min, max] (a constant image maps to 0).
GrayImage quantize_auto(const Tensor& image, unsigned maxval = 255);
/// Inverse linear map to [lo, hi]; result [height x width].
Tensor dequantize(const GrayImage& img, double lo, double hi);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// RFC 4180 field: quoted when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view s);

/// Builder for a CSV table with a header row.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    CsvTable& row(const std::vector<std::string>& cells);
    CsvTable& row(const std::vector<double>& cells);
    std::size_t rows() const noexcept { return rows_; }
    const std::string& text() const noexcept { return text_; }

private:
    std::size_t cols_;
    std::size_t rows_ = 0;
    std::string text_;
};

/// Rank-2 tensor as CSV with header c0,c1,... and lossless values.
std::string encode_matrix_csv(const Tensor& m);
/// Parses a numeric CSV with one header row; throws ParseError.
Tensor decode_matrix_csv(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace mbnn::io
