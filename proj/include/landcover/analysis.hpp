#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "landcover/dataset.hpp"
#include "landcover/geometry.hpp"
#include "landcover/inference.hpp"

namespace landcover {

struct AreaDistribution {
    std::string year_tag;
    std::array<double, kNumClasses> fractions{};
    std::array<std::size_t, kNumClasses> counts{};
    std::size_t valid_cells = 0;
    std::size_t nodata_cells = 0;
    double cell_area = 0.0;  // square CRS units

    double valid_area() const noexcept { return cell_area * static_cast<double>(valid_cells); }

    friend bool operator==(const AreaDistribution&, const AreaDistribution&) = default;
};

/// Center of map cell (row, col) in CRS coordinates.
inline Point cell_center(const ClassMap& m, int row, int col) {
    return {m.geo.x_at(col + 0.5), m.geo.y_at(row + 0.5)};
}

/// Per-class fractions of the valid cells, optionally restricted to cells
/// whose centers fall inside the mask.
inline AreaDistribution area_distribution(const ClassMap& map, const std::vector<Polygon>* mask = nullptr) {
    map.validate();
    AreaDistribution d;
    d.year_tag = map.year_tag.value_or("");
    d.cell_area = map.geo.pixel_size_x * map.geo.pixel_size_y;
    for (int r = 0; r < map.height_tiles; ++r)
        for (int c = 0; c < map.width_tiles; ++c) {
            if (mask && !contains_any(*mask, cell_center(map, r, c))) continue;
            const auto v = map.at(r, c);
            if (v == kNodataClass) {
                ++d.nodata_cells;
            } else {
                ++d.counts[v];
                ++d.valid_cells;
            }
        }
    if (d.valid_cells > 0)
        for (int k = 0; k < kNumClasses; ++k)
            d.fractions[k] = static_cast<double>(d.counts[k]) / static_cast<double>(d.valid_cells);
    return d;
}

inline AreaDistribution area_distribution(const ClassMap& map, const std::vector<Polygon>& mask) {
    return area_distribution(map, &mask);
}

struct ChangeReport {
    std::vector<AreaDistribution> years;
    std::vector<std::array<double, kNumClasses>> deltas;  // deltas[i] = years[i+1] - years[i]
    std::optional<std::string> mask_ref;

    friend bool operator==(const ChangeReport&, const ChangeReport&) = default;
};

namespace detail {

/// Year tags compare numerically when both are integers, else as strings.
inline bool year_before(const std::string& a, const std::string& b) {
    long long x = 0, y = 0;
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
    const bool ia = ra.ec == std::errc{} && ra.ptr == a.data() + a.size();
    const bool ib = rb.ec == std::errc{} && rb.ptr == b.data() + b.size();
    if (ia && ib) return x < y;
    return a < b;
}

} // namespace detail

inline ChangeReport change_report(const std::vector<ClassMap>& maps, const std::vector<Polygon>* mask = nullptr,
                                  std::optional<std::string> mask_ref = std::nullopt) {
    if (maps.size() < 2) fail(ErrorCode::InvalidArgument, "a change report needs at least two maps");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (!maps[i].year_tag) fail(ErrorCode::InvalidArgument, "map " + std::to_string(i) + " has no year tag");
        if (maps[i].width_tiles != maps[0].width_tiles || maps[i].height_tiles != maps[0].height_tiles ||
            !(maps[i].geo == maps[0].geo))
            fail(ErrorCode::GridMismatch, "map " + *maps[i].year_tag + " is not co-registered with " + *maps[0].year_tag);
        if (i > 0 && !detail::year_before(*maps[i - 1].year_tag, *maps[i].year_tag))
            fail(ErrorCode::InvalidArgument, "year tags must be strictly increasing");
    }
    ChangeReport rep;
    rep.mask_ref = std::move(mask_ref);
    for (const auto& m : maps) rep.years.push_back(area_distribution(m, mask));
    for (std::size_t i = 1; i < rep.years.size(); ++i) {
        std::array<double, kNumClasses> d{};
        for (int k = 0; k < kNumClasses; ++k) d[k] = rep.years[i].fractions[k] - rep.years[i - 1].fractions[k];
        rep.deltas.push_back(d);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Outputs

inline constexpr std::string_view kReportHeader = "year,class_name,fraction,delta_from_prev,valid_cells,nodata_cells";

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// One row per (year, class); delta_from_prev is empty for the first year.
inline std::string report_csv(const ChangeReport& rep) {
    std::string out(kReportHeader);
    out += '\n';
    for (std::size_t y = 0; y < rep.years.size(); ++y) {
        const auto& d = rep.years[y];
        for (int k = 0; k < kNumClasses; ++k) {
            out += d.year_tag + ',' + std::string(kClassNames[k]) + ',' + format_number(d.fractions[k]) + ',';
            if (y > 0) out += format_number(rep.deltas[y - 1][k]);
            out += ',' + std::to_string(d.valid_cells) + ',' + std::to_string(d.nodata_cells) + '\n';
        }
    }
    return out;
}

struct ChartLayout {
    double width = 800;
    double height = 400;
    double left = 60;
    double top = 40;
    double plot_width = 560;
    double plot_height = 300;  // a fraction of 1.0 draws this tall
};

inline constexpr ChartLayout kChartLayout{};

namespace detail {

inline std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string xml_escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

inline std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

} // namespace detail

/// Grouped bar chart: one group per year, one bar per class, legend on the right.
inline std::string render_bars(const ChangeReport& rep, const Palette& palette = kDefaultPalette) {
    const auto& L = kChartLayout;
    const double base = L.top + L.plot_height;
    const double group_w = L.plot_width / static_cast<double>(std::max<std::size_t>(rep.years.size(), 1));
    const double bar_w = group_w * 0.8 / kNumClasses;

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"#ffffff\"/>\n";
    s += "<g id=\"plot\" data-baseline=\"" + detail::fixed(base) + "\" data-chart-height=\"" +
         detail::fixed(L.plot_height) + "\">\n";
    s += "<line x1=\"" + detail::fixed(L.left) + "\" y1=\"" + detail::fixed(base) + "\" x2=\"" +
         detail::fixed(L.left + L.plot_width) + "\" y2=\"" + detail::fixed(base) + "\" stroke=\"#000000\"/>\n";
    s += "<line x1=\"" + detail::fixed(L.left) + "\" y1=\"" + detail::fixed(L.top) + "\" x2=\"" +
         detail::fixed(L.left) + "\" y2=\"" + detail::fixed(base) + "\" stroke=\"#000000\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double y = base - L.plot_height * t / 4.0;
        s += "<text x=\"" + detail::fixed(L.left - 6) + "\" y=\"" + detail::fixed(y + 4) +
             "\" font-size=\"11\" text-anchor=\"end\">" + format_number(t / 4.0) + "</text>\n";
    }
    for (std::size_t y = 0; y < rep.years.size(); ++y) {
        const auto& d = rep.years[y];
        const std::string tag = detail::xml_escape(d.year_tag);
        const double gx = L.left + group_w * static_cast<double>(y) + group_w * 0.1;
        for (int k = 0; k < kNumClasses; ++k) {
            const double h = d.fractions[k] * L.plot_height;
            s += "<rect class=\"bar\" data-year=\"" + tag + "\" data-class=\"" + std::string(kClassNames[k]) +
                 "\" x=\"" + detail::fixed(gx + bar_w * k) + "\" y=\"" + detail::fixed(base - h) + "\" width=\"" +
                 detail::fixed(bar_w) + "\" height=\"" + detail::fixed(h) + "\" fill=\"" +
                 detail::hex(palette.classes[k]) + "\"/>\n";
        }
        s += "<text x=\"" + detail::fixed(gx + bar_w * kNumClasses / 2) + "\" y=\"" + detail::fixed(base + 18) +
             "\" font-size=\"12\" text-anchor=\"middle\">" + tag + "</text>\n";
    }
    s += "</g>\n<g id=\"legend\">\n";
    for (int k = 0; k < kNumClasses; ++k) {
        const double y = L.top + 22.0 * k;
        s += "<rect x=\"640\" y=\"" + detail::fixed(y) + "\" width=\"14\" height=\"14\" fill=\"" +
             detail::hex(palette.classes[k]) + "\"/>\n";
        s += "<text x=\"660\" y=\"" + detail::fixed(y + 12) + "\" font-size=\"12\">" + std::string(kClassNames[k]) +
             "</text>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

} // namespace landcover
