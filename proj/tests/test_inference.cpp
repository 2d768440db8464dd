#include <gtest/gtest.h>

#include "landcover/inference.hpp"
#include "landcover/synth.hpp"
#include "support.hpp"

using namespace landcover;
using testing_support::random_raster;
using testing_support::TempDir;

namespace {

nn::ModelConfig tiny_config() {
    auto c = nn::ModelConfig::preset("compact");
    c.stage_widths = {4, 8, 8, 16};
    return c;
}

nn::Checkpoint tiny_checkpoint(std::uint64_t seed, std::optional<double> pixel_size = std::nullopt) {
    nn::Model<float> m(tiny_config());
    m.initialize(seed);
    Rng rng(seed);
    nn::Tensor<float> x(nn::Shape{8, 4, 32, 32});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    m.forward(x, nn::Mode::Train);
    m.release_cache();
    return nn::snapshot(m, BandStats{{100, 100, 100, 100}, {40, 40, 40, 40}}, pixel_size);
}

ClassMap map_from(int w, int h, std::vector<std::uint8_t> cells) {
    ClassMap m(w, h);
    m.cells = std::move(cells);
    m.validate();
    return m;
}

} // namespace

TEST(Classify, MapDimensionsAndGeo) {
    Rng rng(1);
    const auto ck = tiny_checkpoint(2);
    const auto r = random_raster(rng, 64, 64, SampleType::U8, {100, 200, 0.6, 0.6});
    const auto map = classify_raster(r, ck);
    EXPECT_EQ(map.width_tiles, 2);
    EXPECT_EQ(map.height_tiles, 2);
    EXPECT_EQ(map.geo, (GeoTransform{100, 200, 0.6 * 32, 0.6 * 32}));
    const auto odd = classify_raster(random_raster(rng, 70, 33, SampleType::U8), ck);
    EXPECT_EQ(odd.width_tiles, 3);
    EXPECT_EQ(odd.height_tiles, 2);
}

TEST(Classify, BatchSizeDoesNotChangeMap) {
    Rng rng(3);
    const auto ck = tiny_checkpoint(4);
    const auto r = random_raster(rng, 160, 96, SampleType::U8);
    ClassifyOptions one, many;
    one.batch_size = 1;
    many.batch_size = 64;
    EXPECT_EQ(classify_raster(r, ck, one), classify_raster(r, ck, many));
}

TEST(Classify, AllNodataBlockIsNodataCell) {
    Rng rng(5);
    auto r = random_raster(rng, 64, 64, SampleType::U8);
    for (auto& v : r.samples()) v = std::max<std::uint16_t>(v, 1);
    r.set_nodata(0);
    for (int b = 0; b < kBands; ++b)
        for (int row = 32; row < 64; ++row)
            for (int col = 0; col < 32; ++col) r.at(b, row, col) = 0;
    const auto map = classify_raster(r, tiny_checkpoint(6));
    EXPECT_EQ(map.at(1, 0), kNodataClass);
    for (auto [row, col] : {std::pair{0, 0}, {0, 1}, {1, 1}}) EXPECT_LT(map.at(row, col), kNumClasses);
}

TEST(Classify, HalfNodataTileStillClassified) {
    Rng rng(7);
    auto r = random_raster(rng, 32, 32, SampleType::U8);
    for (auto& v : r.samples()) v = std::max<std::uint16_t>(v, 1);
    r.set_nodata(0);
    for (int row = 0; row < 16; ++row)
        for (int col = 0; col < 32; ++col) r.at(3, row, col) = 0;  // exactly 50%
    EXPECT_LT(classify_raster(r, tiny_checkpoint(8)).at(0, 0), kNumClasses);
    r.at(3, 16, 0) = 0;  // one more pixel tips it over
    EXPECT_EQ(classify_raster(r, tiny_checkpoint(8)).at(0, 0), kNodataClass);
}

TEST(Classify, ResolutionMismatchWarnsOrFails) {
    Rng rng(9);
    const auto ck = tiny_checkpoint(10, 0.6);
    const auto r = random_raster(rng, 32, 32, SampleType::U8, {0, 0, 1.0, 1.0});
    std::vector<std::string> warnings;
    ClassifyOptions opt;
    opt.warn = [&](const std::string& w) { warnings.push_back(w); };
    classify_raster(r, ck, opt);
    EXPECT_EQ(warnings.size(), 1u);
    opt.strict_resolution = true;
    EXPECT_CODE(classify_raster(r, ck, opt), ResolutionMismatch);
    const auto ok = random_raster(rng, 32, 32, SampleType::U8, {0, 0, 0.6, 0.6});
    warnings.clear();
    classify_raster(ok, ck, opt);
    EXPECT_TRUE(warnings.empty());
}

TEST(Classify, ModelMustMatchCheckpoint) {
    Rng rng(11);
    const auto ck = tiny_checkpoint(12);
    nn::Model<float> other(nn::ModelConfig::preset("compact"));
    EXPECT_CODE(classify_raster(random_raster(rng, 32, 32, SampleType::U8), other, ck), ArchMismatch);
}

TEST(Filter, ConstantMapUnchanged) {
    const ClassMap m(5, 4, 3);
    EXPECT_EQ(majority_filter(m), m);
}

TEST(Filter, IsolatedCenterAbsorbed) {
    ClassMap m(3, 3, 2);
    m.at(1, 1) = 4;
    EXPECT_EQ(majority_filter(m).at(1, 1), 2);
}

// Direct vote count over the clipped window, center included.
static int window_mode(const ClassMap& m, int r, int c) {
    std::array<int, kNumClasses> votes{};
    for (int rr = r - 1; rr <= r + 1; ++rr)
        for (int cc = c - 1; cc <= c + 1; ++cc)
            if (rr >= 0 && cc >= 0 && rr < m.height_tiles && cc < m.width_tiles && m.at(rr, cc) != kNodataClass)
                ++votes[m.at(rr, cc)];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

TEST(Filter, FourFourSplitDecidedByCenter) {
    auto m = map_from(3, 3, {1, 3, 1, 3, 3, 1, 1, 3, 3});  // four 1s, four 3s around
    ASSERT_EQ(window_mode(m, 1, 1), 3);
    EXPECT_EQ(majority_filter(m).at(1, 1), 3);
    m.at(1, 1) = 1;
    ASSERT_EQ(window_mode(m, 1, 1), 1);
    EXPECT_EQ(majority_filter(m).at(1, 1), 1);
}

TEST(Filter, TiesGoToLowestClass) {
    auto m = map_from(2, 1, {4, 2});
    const auto f = majority_filter(m);
    EXPECT_EQ(f.at(0, 0), 2);
    EXPECT_EQ(f.at(0, 1), 2);
}

TEST(Filter, NodataFixedAndExcluded) {
    auto m = map_from(3, 1, {255, 1, 255});
    EXPECT_EQ(majority_filter(m), m);
    auto m2 = map_from(3, 3, {255, 255, 255, 255, 0, 255, 4, 4, 255});
    const auto f = majority_filter(m2);
    EXPECT_EQ(f.at(1, 1), 4);
    EXPECT_EQ(f.at(0, 0), kNodataClass);
}

TEST(Filter, MatchesBruteForceOnRandomMaps) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        ClassMap m(1 + static_cast<int>(rng.uniform_below(9)), 1 + static_cast<int>(rng.uniform_below(9)));
        for (auto& v : m.cells) v = rng.uniform_below(6) == 5 ? kNodataClass : static_cast<std::uint8_t>(rng.uniform_below(5));
        const auto f = majority_filter(m);
        for (int r = 0; r < m.height_tiles; ++r)
            for (int c = 0; c < m.width_tiles; ++c)
                EXPECT_EQ(f.at(r, c), m.at(r, c) == kNodataClass ? kNodataClass : window_mode(m, r, c));
    }
}

TEST(Render, PaletteTriples) {
    const auto m = map_from(2, 2, {0, 1, 4, 255});
    const auto img = render_map(m);
    const std::string header = "P6\n2 2\n255\n";
    ASSERT_EQ(img.substr(0, header.size()), header);
    ASSERT_EQ(img.size(), header.size() + 12);
    auto px = [&](int i) {
        return Rgb{static_cast<std::uint8_t>(img[header.size() + 3 * i]),
                   static_cast<std::uint8_t>(img[header.size() + 3 * i + 1]),
                   static_cast<std::uint8_t>(img[header.size() + 3 * i + 2])};
    };
    EXPECT_EQ(px(0), (Rgb{0, 100, 0}));
    EXPECT_EQ(px(1), (Rgb{144, 238, 144}));
    EXPECT_EQ(px(2), (Rgb{139, 69, 19}));
    EXPECT_EQ(px(3), (Rgb{0, 0, 0}));
}

TEST(Render, AllNodataIsBlackAndDeterministic) {
    TempDir dir;
    const ClassMap m(3, 2);
    const auto img = render_map(m);
    for (std::size_t i = std::string("P6\n3 2\n255\n").size(); i < img.size(); ++i) EXPECT_EQ(img[i], '\0');
    write_ppm(m, dir / "a.ppm");
    write_ppm(m, dir / "b.ppm");
    EXPECT_EQ(detail::read_file(dir / "a.ppm"), detail::read_file(dir / "b.ppm"));
}

TEST(ClassMapFile, RoundTripAndErrors) {
    TempDir dir;
    auto m = map_from(3, 2, {0, 1, 2, 3, 4, 255});
    m.geo = {10, 20, 19.2, 19.2};
    m.year_tag = "2014";
    write_class_map(m, dir / "m.cmap");
    EXPECT_EQ(read_class_map(dir / "m.cmap"), m);
    m.year_tag.reset();
    EXPECT_EQ(decode_class_map(encode_class_map(m)), m);

    auto bytes = encode_class_map(m);
    EXPECT_CODE(decode_class_map(bytes.substr(0, bytes.size() - 1)), HeaderMismatch);
    bytes.back() = 7;
    EXPECT_CODE(decode_class_map(bytes), InvalidArgument);
    EXPECT_CODE(decode_class_map("CMAQ"), BadMagic);
}

TEST(Synth, SceneLayoutFractions) {
    const auto layout = synth::scene_layout();
    std::array<int, kNumClasses> counts{};
    for (auto v : layout.cells) ++counts[v];
    EXPECT_EQ(counts, (std::array<int, kNumClasses>{20, 15, 15, 25, 25}));
    const auto scene = synth::make_scene(1);
    EXPECT_EQ(scene.width(), 320);
    EXPECT_EQ(scene, synth::make_scene(1));
}
