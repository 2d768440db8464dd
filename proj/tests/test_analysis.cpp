#include <regex>

#include <gtest/gtest.h>

#include "landcover/analysis.hpp"
#include "support.hpp"

using namespace landcover;

namespace {

ClassMap tagged(int w, int h, std::vector<std::uint8_t> cells, std::string year, GeoTransform geo = {0, 0, 19.2, 19.2}) {
    ClassMap m(w, h, kNodataClass, geo);
    m.cells = std::move(cells);
    m.year_tag = std::move(year);
    m.validate();
    return m;
}

struct Bar {
    std::string year, cls;
    double y, height;
};

std::vector<Bar> parse_bars(const std::string& svg) {
    static const std::regex re(
        R"re(<rect class="bar" data-year="([^"]*)" data-class="([^"]*)" x="[^"]*" y="([^"]*)" width="[^"]*" height="([^"]*)")re");
    std::vector<Bar> out;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
        out.push_back({(*it)[1], (*it)[2], std::stod((*it)[3]), std::stod((*it)[4])});
    return out;
}

double svg_attr(const std::string& svg, const std::string& name) {
    const std::regex re(name + R"re(="([^"]*)")re");
    std::smatch m;
    if (!std::regex_search(svg, m, re)) throw std::runtime_error("missing " + name);
    return std::stod(m[1]);
}

} // namespace

TEST(Area, FourCellExample) {
    const auto d = area_distribution(tagged(2, 2, {0, 0, 2, 255}, "2009"));
    EXPECT_EQ(d.fractions[0], 2.0 / 3.0);
    EXPECT_EQ(d.fractions[2], 1.0 / 3.0);
    EXPECT_EQ(d.fractions[1] + d.fractions[3] + d.fractions[4], 0.0);
    EXPECT_EQ(d.valid_cells, 3u);
    EXPECT_EQ(d.nodata_cells, 1u);
    EXPECT_EQ(d.year_tag, "2009");
    EXPECT_DOUBLE_EQ(d.cell_area, (32 * 0.6) * (32 * 0.6));
}

TEST(Area, UniformAndEmpty) {
    EXPECT_EQ(area_distribution(ClassMap(4, 3, 4)).fractions[4], 1.0);
    const auto none = area_distribution(ClassMap(2, 2));
    EXPECT_EQ(none.valid_cells, 0u);
    EXPECT_EQ(none.nodata_cells, 4u);
    for (double f : none.fractions) EXPECT_EQ(f, 0.0);
}

TEST(Area, RandomMapsMatchRecount) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        ClassMap m(1 + static_cast<int>(rng.uniform_below(12)), 1 + static_cast<int>(rng.uniform_below(12)));
        for (auto& v : m.cells) v = rng.uniform_below(7) == 0 ? kNodataClass : static_cast<std::uint8_t>(rng.uniform_below(5));
        const auto d = area_distribution(m);
        std::array<double, kNumClasses> n{};
        double valid = 0;
        for (auto v : m.cells)
            if (v != kNodataClass) {
                n[v] += 1;
                valid += 1;
            }
        for (int k = 0; k < kNumClasses; ++k) EXPECT_EQ(d.fractions[k], valid > 0 ? n[k] / valid : 0.0);
    }
}

TEST(Area, MaskUsesCellCenters) {
    // 4x1 map, cells 10 units wide starting at x=0.
    const auto m = tagged(4, 1, {0, 1, 2, 3}, "a", {0, 10, 10, 10});
    const std::vector<Polygon> mask{rectangle(0, 0, 20, 10)};  // centers 5 and 15
    const auto d = area_distribution(m, mask);
    EXPECT_EQ(d.valid_cells, 2u);
    EXPECT_EQ(d.fractions[0], 0.5);
    EXPECT_EQ(d.fractions[1], 0.5);
}

TEST(Change, IdenticalMapsZeroDeltas) {
    const auto a = tagged(2, 2, {0, 1, 2, 3}, "2009");
    auto b = a;
    b.year_tag = "2012";
    const auto rep = change_report({a, b});
    ASSERT_EQ(rep.years.size(), 2u);
    ASSERT_EQ(rep.deltas.size(), 1u);
    for (double d : rep.deltas[0]) EXPECT_EQ(d, 0.0);
}

TEST(Change, ShrubToBarren) {
    const auto rep = change_report({tagged(2, 2, {2, 2, 2, 2}, "2012"), tagged(2, 2, {4, 4, 4, 4}, "2014")});
    EXPECT_EQ(rep.deltas[0][2], -1.0);
    EXPECT_EQ(rep.deltas[0][4], 1.0);
}

TEST(Change, BarrenJumpEighteenPercent) {
    // 10x10 maps: 2012 has 12 Barren cells, 2014 has 30, the rest Conifer.
    std::vector<std::uint8_t> y2012(100, 0), y2014(100, 0);
    std::fill(y2012.begin(), y2012.begin() + 12, 4);
    std::fill(y2014.begin(), y2014.begin() + 30, 4);
    const auto rep = change_report({tagged(10, 10, y2012, "2012"), tagged(10, 10, y2014, "2014")});
    EXPECT_NEAR(rep.deltas[0][4], 0.18, 1e-12);
    EXPECT_NEAR(rep.deltas[0][0], -0.18, 1e-12);
    const auto csv = report_csv(rep);
    EXPECT_NE(csv.find("2014,Barren,0.3,0.18,100,0\n"), std::string::npos) << csv;
}

TEST(Change, Preconditions) {
    const auto a = tagged(2, 2, {0, 1, 2, 3}, "2009");
    EXPECT_CODE(change_report({a}), InvalidArgument);
    EXPECT_CODE(change_report({a, tagged(2, 1, {0, 1}, "2012")}), GridMismatch);
    EXPECT_CODE(change_report({a, tagged(2, 2, {0, 1, 2, 3}, "2012", {5, 0, 19.2, 19.2})}), GridMismatch);
    EXPECT_CODE(change_report({a, tagged(2, 2, {0, 1, 2, 3}, "2009")}), InvalidArgument);
    EXPECT_CODE(change_report({a, tagged(2, 2, {0, 1, 2, 3}, "900")}), InvalidArgument);
    EXPECT_NO_THROW(change_report({tagged(2, 2, {0, 1, 2, 3}, "900"), a}));
    ClassMap untagged = a;
    untagged.year_tag.reset();
    EXPECT_CODE(change_report({a, untagged}), InvalidArgument);
}

TEST(Report, CsvLayout) {
    const auto rep = change_report({tagged(1, 2, {0, 255}, "2009"), tagged(1, 2, {1, 1}, "2010")});
    const auto csv = report_csv(rep);
    const std::string expected =
        "year,class_name,fraction,delta_from_prev,valid_cells,nodata_cells\n"
        "2009,Conifer,1,,1,1\n2009,Hardwood,0,,1,1\n2009,Shrub,0,,1,1\n2009,ReforestedTree,0,,1,1\n"
        "2009,Barren,0,,1,1\n"
        "2010,Conifer,0,-1,2,0\n2010,Hardwood,1,1,2,0\n2010,Shrub,0,0,2,0\n2010,ReforestedTree,0,0,2,0\n"
        "2010,Barren,0,0,2,0\n";
    EXPECT_EQ(csv, expected);
}

TEST(Svg, SingleYearFullHeightBar) {
    ChangeReport rep;
    rep.years.push_back(area_distribution(tagged(1, 1, {0}, "2020")));
    const auto svg = render_bars(rep);
    const auto bars = parse_bars(svg);
    ASSERT_EQ(bars.size(), 5u);
    const double chart = svg_attr(svg, "data-chart-height"), base = svg_attr(svg, "data-baseline");
    EXPECT_EQ(bars[0].height, chart);
    EXPECT_EQ(bars[0].y, base - chart);
    for (int k = 1; k < 5; ++k) EXPECT_EQ(bars[k].height, 0.0);
    EXPECT_NE(svg.find("width=\"800\" height=\"400\""), std::string::npos);
    for (auto n : kClassNames) EXPECT_NE(svg.find(">" + std::string(n) + "</text>"), std::string::npos);
}

TEST(Svg, HeightsProportionalAndDeterministic) {
    Rng rng(2);
    std::vector<ClassMap> maps;
    for (int y = 0; y < 4; ++y) {
        ClassMap m(7, 5, 0, {0, 0, 19.2, 19.2});
        for (auto& v : m.cells) v = static_cast<std::uint8_t>(rng.uniform_below(5));
        m.year_tag = std::to_string(2010 + 2 * y);
        maps.push_back(m);
    }
    const auto rep = change_report(maps);
    const auto svg = render_bars(rep);
    EXPECT_EQ(svg, render_bars(rep));
    const auto bars = parse_bars(svg);
    ASSERT_EQ(bars.size(), 20u);
    const double chart = svg_attr(svg, "data-chart-height"), base = svg_attr(svg, "data-baseline");
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& d = rep.years[i / 5];
        EXPECT_EQ(bars[i].year, d.year_tag);
        EXPECT_EQ(bars[i].cls, kClassNames[i % 5]);
        EXPECT_NEAR(bars[i].height, d.fractions[i % 5] * chart, 0.0005 + 1e-9);
        EXPECT_NEAR(bars[i].y + bars[i].height, base, 0.001 + 1e-9);
    }
}

TEST(Svg, YearTagEscaped) {
    ChangeReport rep;
    auto m = tagged(1, 1, {0}, "a<b");
    rep.years.push_back(area_distribution(m));
    const auto svg = render_bars(rep);
    EXPECT_EQ(svg.find("a<b"), std::string::npos);
    EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
}
