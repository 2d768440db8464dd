#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "landcover/detail/binary_io.hpp"
#include "landcover/raster.hpp"
#include "support.hpp"

using namespace landcover;
using testing_support::random_raster;
using testing_support::TempDir;

TEST(R4B, RoundTripBothDtypes) {
    TempDir dir;
    Rng rng(7);
    for (auto dtype : {SampleType::U8, SampleType::U16LE}) {
        auto r = random_raster(rng, 13, 9, dtype, {500000.25, 4200000.5, 0.6, 0.6});
        r.set_nodata(dtype == SampleType::U8 ? 0 : 65535);
        r.set_crs("EPSG:26910");
        write_r4b(r, dir / "r.r4b");
        EXPECT_EQ(read_r4b(dir / "r.r4b"), r);
    }
}

TEST(R4B, WritesAreByteIdentical) {
    TempDir dir;
    Rng rng(8);
    const auto r = random_raster(rng, 5, 4, SampleType::U16LE);
    write_r4b(r, dir / "a.r4b");
    write_r4b(r, dir / "b.r4b");
    EXPECT_EQ(detail::read_file(dir / "a.r4b"), detail::read_file(dir / "b.r4b"));
}

TEST(R4B, WrongMagicIsBadMagic) {
    const Raster4B r(2, 2, SampleType::U8);
    auto bytes = encode_r4b(r);
    bytes[3] = '0';
    EXPECT_CODE(decode_r4b(bytes), BadMagic);
    EXPECT_CODE(decode_r4b("xy"), BadMagic);
}

TEST(R4B, ShortPayloadIsHeaderMismatch) {
    const Raster4B r(10, 10, SampleType::U8);
    auto bytes = encode_r4b(r);
    ASSERT_EQ(bytes.substr(bytes.size() - 400).size(), 400u);
    bytes.pop_back();  // 399 payload bytes for a 10x10x4 u8 header
    EXPECT_CODE(decode_r4b(bytes), HeaderMismatch);
}

TEST(R4B, UnknownDtypeRejected) {
    const Raster4B r(1, 1, SampleType::U8);
    auto bytes = encode_r4b(r);
    const auto pos = bytes.find("\"u8\"");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 4, "\"f4\"");
    EXPECT_CODE(decode_r4b(bytes), UnsupportedDtype);
}

TEST(R4B, OnePixelFileLayout) {
    Raster4B r(1, 1, SampleType::U8);
    for (int b = 0; b < kBands; ++b) r.at(b, 0, 0) = static_cast<std::uint16_t>(10 + b);
    const auto bytes = encode_r4b(r);
    ASSERT_EQ(bytes.substr(0, 5), "R4B1\n");
    const std::uint32_t len = detail::get_u32_le(bytes.data() + 5);
    EXPECT_EQ(bytes.size(), 5u + 4u + len + 4u);
    EXPECT_TRUE(nlohmann::json::accept(bytes.substr(9, len)));
    EXPECT_EQ(bytes.substr(9 + len), std::string("\x0a\x0b\x0c\x0d"));
}

TEST(R4B, U16StoredLittleEndian) {
    Raster4B r(1, 1, SampleType::U16LE);
    r.at(0, 0, 0) = 0x1234;
    r.at(3, 0, 0) = 0xBEEF;
    const auto bytes = encode_r4b(r);
    const std::string payload = bytes.substr(bytes.size() - 8);
    EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0x34);
    EXPECT_EQ(static_cast<unsigned char>(payload[1]), 0x12);
    EXPECT_EQ(static_cast<unsigned char>(payload[6]) | static_cast<unsigned char>(payload[7]) << 8, 0xBEEF);
}

TEST(Raster, InvariantsEnforced) {
    EXPECT_CODE(Raster4B(0, 3, SampleType::U8), InvalidArgument);
    EXPECT_CODE(Raster4B(3, 3, SampleType::U8, GeoTransform{0, 0, 0.0, 1.0}), InvalidArgument);
    EXPECT_CODE(Raster4B(2, 2, SampleType::U8, std::vector<std::uint16_t>(15)), HeaderMismatch);
    EXPECT_CODE(Raster4B(1, 1, SampleType::U8, std::vector<std::uint16_t>{0, 0, 0, 256}), InvalidArgument);
}

TEST(Resample, SameSizeIsIdentity) {
    Rng rng(3);
    const auto r = random_raster(rng, 17, 11, SampleType::U16LE, {1, 2, 0.6, 0.6});
    EXPECT_EQ(resample(r, 0.6), r);
}

// Brute-force bilinear value at an output pixel centre, written directly
// from the interpolation definition.
static double bilinear_oracle(const Raster4B& r, int band, double x, double y) {
    x = std::clamp(x, 0.0, r.width() - 1.0);
    y = std::clamp(y, 0.0, r.height() - 1.0);
    double acc = 0.0;
    for (int row = 0; row < r.height(); ++row)
        for (int col = 0; col < r.width(); ++col) {
            const double wx = std::max(0.0, 1.0 - std::abs(x - col));
            const double wy = std::max(0.0, 1.0 - std::abs(y - row));
            acc += wx * wy * r.at(band, row, col);
        }
    return acc;
}

TEST(Resample, TwoByTwoHalfMetre) {
    Raster4B r(2, 2, SampleType::U8, GeoTransform{0, 0, 1.0, 1.0});
    for (int row = 0; row < 2; ++row) r.at(0, row, 1) = 100;
    const auto out = resample(r, 0.5);
    ASSERT_EQ(out.width(), 4);
    ASSERT_EQ(out.height(), 4);
    EXPECT_EQ(out.geo().pixel_size_x, 0.5);
    const int expected[4] = {0, 25, 75, 100};
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 4; ++col) {
            const double x = (col + 0.5) * 0.5 - 0.5, y = (row + 0.5) * 0.5 - 0.5;
            EXPECT_EQ(out.at(0, row, col), std::floor(bilinear_oracle(r, 0, x, y) + 0.5));
            EXPECT_EQ(out.at(0, row, col), expected[col]);
        }
}

TEST(Resample, RandomAgainstBruteForce) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto r = random_raster(rng, 3 + trial % 5, 2 + trial % 4, SampleType::U8, {0, 0, 1.0, 1.0});
        const double target = rng.uniform(0.3, 2.5);
        const auto out = resample(r, target);
        for (int b = 0; b < kBands; ++b)
            for (int row = 0; row < out.height(); ++row)
                for (int col = 0; col < out.width(); ++col) {
                    const double v = bilinear_oracle(r, b, (col + 0.5) * target - 0.5, (row + 0.5) * target - 0.5);
                    EXPECT_NEAR(out.at(b, row, col), v, 0.5 + 1e-9);
                }
    }
}

TEST(Resample, OneMetreToPointSixWidth) {
    const Raster4B r(100, 10, SampleType::U8, GeoTransform{0, 0, 1.0, 1.0});
    const auto out = resample(r, 0.6);
    EXPECT_EQ(out.width(), 167);
    EXPECT_EQ(out.height(), 17);
}

TEST(Resample, NodataPropagatesFromWeightedNeighbours) {
    Raster4B r(4, 1, SampleType::U8, GeoTransform{0, 0, 1.0, 1.0}, std::uint16_t{0});
    for (int b = 0; b < kBands; ++b)
        for (int c = 0; c < 4; ++c) r.at(b, 0, c) = 50;
    r.at(2, 0, 3) = 0;  // one band nodata marks the pixel
    const auto out = resample(r, 0.5);
    for (int c = 0; c < out.width(); ++c) {
        const double x = std::clamp((c + 0.5) * 0.5 - 0.5, 0.0, 3.0);
        const bool touches = x > 2.0;
        EXPECT_EQ(out.is_nodata(0, c), touches) << c;
    }
}

TEST(Resample, NonPositiveTargetRejected) {
    const Raster4B r(2, 2, SampleType::U8);
    EXPECT_CODE(resample(r, 0.0), InvalidArgument);
}

TEST(Ndvi, Formula) {
    EXPECT_DOUBLE_EQ(ndvi_value(50, 100), 50.0 / 150.0);
    EXPECT_EQ(ndvi_value(77, 77), 0.0);
    EXPECT_EQ(ndvi_value(0, 0), 0.0);
}

TEST(Ndvi, NodataExcludedFromMean) {
    Raster4B r(2, 1, SampleType::U8, GeoTransform{}, std::uint16_t{255});
    r.at(0, 0, 0) = 50;
    r.at(3, 0, 0) = 100;
    r.at(0, 0, 1) = 255;
    const auto g = ndvi(r);
    EXPECT_TRUE(std::isnan(g.at(0, 1)));
    EXPECT_DOUBLE_EQ(g.mean(), 50.0 / 150.0);
}

TEST(Dice, GridShapes) {
    const auto tiles = dice(Raster4B(64, 96, SampleType::U8));
    ASSERT_EQ(tiles.size(), 6u);
    std::set<std::pair<int, int>> origins;
    for (const auto& t : tiles) origins.insert({t.origin_col, t.origin_row});
    for (int c : {0, 32})
        for (int r : {0, 32, 64}) EXPECT_TRUE(origins.count({c, r}));
    EXPECT_EQ(tiles[1].origin_col, 32);
    EXPECT_EQ(tiles[1].origin_row, 0);
    EXPECT_EQ(dice(Raster4B(70, 70, SampleType::U8)).size(), 4u);
    EXPECT_TRUE(dice(Raster4B(31, 31, SampleType::U8)).empty());
}

TEST(Dice, TileContentMatchesSource) {
    Rng rng(5);
    const auto r = random_raster(rng, 70, 40, SampleType::U8);
    for (const auto& t : dice(r))
        for (int b = 0; b < kBands; ++b)
            for (int row = 0; row < kTileSize; ++row)
                for (int col = 0; col < kTileSize; ++col)
                    ASSERT_EQ(t.at(b, row, col), r.at(b, t.origin_row + row, t.origin_col + col));
}

TEST(Pad, Examples) {
    Rng rng(9);
    const auto square = random_raster(rng, 64, 64, SampleType::U8);
    EXPECT_EQ(pad_to_multiple(square, 32), square);

    const auto r = random_raster(rng, 70, 70, SampleType::U8, {3, 4, 0.6, 0.6});
    const auto p = pad_to_multiple(r, 32);
    ASSERT_EQ(p.width(), 96);
    ASSERT_EQ(p.height(), 96);
    EXPECT_EQ(p.geo(), r.geo());
    for (int b = 0; b < kBands; ++b)
        for (int row = 0; row < 70; ++row)
            for (int col = 70; col < 96; ++col) ASSERT_EQ(p.at(b, row, col), r.at(b, row, 69));

    Raster4B one(1, 1, SampleType::U8);
    for (int b = 0; b < kBands; ++b) one.at(b, 0, 0) = static_cast<std::uint16_t>(40 + b);
    const auto big = pad_to_multiple(one, 32);
    ASSERT_EQ(big.width(), 32);
    for (int b = 0; b < kBands; ++b)
        for (auto v : big.band(b)) ASSERT_EQ(v, 40 + b);

    EXPECT_CODE(pad_to_multiple(one, 0), InvalidArgument);
}
