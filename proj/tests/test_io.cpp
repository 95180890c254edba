#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "mbnn/errors.hpp"
#include "mbnn/io.hpp"

using namespace mbnn;
using namespace mbnn::io;

namespace {

GrayImage small_image(unsigned maxval) {
    GrayImage img;
    img.width = 3;
    img.height = 2;
    img.maxval = maxval;
    img.pixels = {0, 1, 2, static_cast<std::uint16_t>(maxval / 2), static_cast<std::uint16_t>(maxval - 1),
                  static_cast<std::uint16_t>(maxval)};
    return img;
}

}  // namespace

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"),
              "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST(Pgm, BinaryEightBitLayout) {
    const std::string bytes = encode_pgm(small_image(255));
    const std::string expect = std::string("P5\n3 2\n255\n") + std::string("\x00\x01\x02\x7f\xfe\xff", 6);
    EXPECT_EQ(bytes, expect);
}

TEST(Pgm, BinarySixteenBitIsBigEndian) {
    GrayImage img;
    img.width = 2;
    img.height = 1;
    img.maxval = 65535;
    img.pixels = {0x1234, 0xfffe};
    EXPECT_EQ(encode_pgm(img), std::string("P5\n2 1\n65535\n\x12\x34\xff\xfe", 17));
}

TEST(Pgm, PlainLayout) {
    EXPECT_EQ(encode_pgm(small_image(255), PgmFormat::plain), "P2\n3 2\n255\n0 1 2\n127 254 255\n");
}

TEST(Pgm, RoundTripAllFormats) {
    for (unsigned maxval : {3u, 255u, 256u, 1023u, 65535u}) {
        for (auto fmt : {PgmFormat::plain, PgmFormat::binary}) {
            const GrayImage img = small_image(maxval);
            const GrayImage back = decode_pgm(encode_pgm(img, fmt));
            EXPECT_EQ(back.width, img.width);
            EXPECT_EQ(back.height, img.height);
            EXPECT_EQ(back.maxval, img.maxval);
            EXPECT_EQ(back.pixels, img.pixels) << maxval;
        }
    }
}

TEST(Pgm, HeaderCommentsAccepted) {
    const GrayImage img = decode_pgm("P2 # comment\n# another\n2 1 # size\n9\n3 9\n");
    EXPECT_EQ(img.width, 2u);
    EXPECT_EQ(img.maxval, 9u);
    EXPECT_EQ(img.pixels, (std::vector<std::uint16_t>{3, 9}));
}

TEST(Pgm, MalformedInputs) {
    EXPECT_THROW((void)decode_pgm("P6\n1 1\n255\n\x00"), ParseError);
    EXPECT_THROW((void)decode_pgm("P5\n2 2\n255\n\x01\x02"), ParseError);
    EXPECT_THROW((void)decode_pgm("P2\n2 1\n9\n3 10\n"), ParseError);
    EXPECT_THROW((void)decode_pgm("P2\n0 1\n9\n"), ParseError);
    EXPECT_THROW((void)decode_pgm("P2\n1 1\n70000\n1\n"), ParseError);
    try {
        (void)decode_pgm("P2\n2 1\n9\n3 x\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 11u);
    }
}

TEST(Pgm, EncodeRejectsBadImages) {
    GrayImage img = small_image(255);
    img.pixels.pop_back();
    EXPECT_THROW((void)encode_pgm(img), DimensionError);
    img = small_image(100);
    img.pixels[0] = 101;
    EXPECT_THROW((void)encode_pgm(img), ParameterError);
}

TEST(Pgm, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "mbnn_io_test.pgm";
    write_pgm(path, small_image(4095));
    EXPECT_EQ(read_pgm(path).pixels, small_image(4095).pixels);
    std::filesystem::remove(path);
    EXPECT_THROW((void)read_pgm(path), FileError);
}

TEST(Quantize, LinearMapClampAndRounding) {
    Tensor t({1, 6});
    const double v[] = {-1.0, 0.0, 0.5, 1.0 / 255.0 * 0.5, 1.0, 2.0};
    for (std::size_t i = 0; i < 6; ++i) t[i] = v[i];
    const GrayImage q = quantize(t, 0.0, 1.0);
    EXPECT_EQ(q.pixels, (std::vector<std::uint16_t>{0, 0, 128, 1, 255, 255}));
    EXPECT_EQ(q.width, 6u);
    EXPECT_EQ(q.height, 1u);
    EXPECT_THROW((void)quantize(t, 1.0, 1.0), ParameterError);
    EXPECT_THROW((void)quantize(Tensor({4}), 0.0, 1.0), DimensionError);
}

TEST(Quantize, AutoRangeAndDequantize) {
    Tensor t({2, 2});
    t[0] = -2.0;
    t[1] = 0.0;
    t[2] = 2.0;
    t[3] = 1.0;
    const GrayImage q = quantize_auto(t, 4);
    EXPECT_EQ(q.pixels, (std::vector<std::uint16_t>{0, 2, 4, 3}));
    const Tensor back = dequantize(q, -2.0, 2.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(back[i], t[i]);
    Tensor c({1, 2});
    c[0] = c[1] = 3.0;
    EXPECT_EQ(quantize_auto(c).pixels, (std::vector<std::uint16_t>{0, 0}));
}

TEST(Csv, FieldQuoting) {
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, TableRowsMustMatchHeader) {
    CsvTable t({"name", "value"});
    t.row(std::vector<std::string>{"x,y", "1"});
    t.row(std::vector<double>{0.1, -2.5});
    EXPECT_EQ(t.text(), "name,value\n\"x,y\",1\n0.1,-2.5\n");
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_THROW(t.row(std::vector<double>{1.0}), DimensionError);
}

TEST(Csv, MatrixRoundTripIsLossless) {
    Tensor m({3, 2});
    m[0] = 0.1;
    m[1] = 1.0 / 3.0;
    m[2] = -std::numeric_limits<double>::denorm_min();
    m[3] = 1e300;
    m[4] = -0.0;
    m[5] = 123456789.123456789;
    const std::string text = encode_matrix_csv(m);
    EXPECT_EQ(text.substr(0, 6), "c0,c1\n");
    const Tensor back = decode_matrix_csv(text);
    ASSERT_EQ(back.shape(), m.shape());
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(back[i], m[i]);
        EXPECT_EQ(std::signbit(back[i]), std::signbit(m[i]));
    }
}

TEST(Csv, MatrixParseErrors) {
    EXPECT_THROW((void)decode_matrix_csv("c0,c1\n1,2\n3\n"), ParseError);
    EXPECT_THROW((void)decode_matrix_csv("c0\n"), ParseError);
    EXPECT_THROW((void)decode_matrix_csv("c0\n1"), ParseError);
    try {
        (void)decode_matrix_csv("c0,c1\n1,zz\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 8u);
    }
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(std::stod(format_double(1.0 / 7.0)), 1.0 / 7.0);
}
