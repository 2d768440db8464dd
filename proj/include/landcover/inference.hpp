#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/dataset.hpp"
#include "landcover/detail/binary_io.hpp"
#include "landcover/nn/train.hpp"
#include "landcover/raster.hpp"

namespace landcover {

/// Tile-resolution class grid. Cells are row-major class ids, 255 = nodata.
struct ClassMap {
    int width_tiles = 0;
    int height_tiles = 0;
    std::vector<std::uint8_t> cells;
    GeoTransform geo{};
    std::optional<std::string> year_tag;

    ClassMap() = default;
    ClassMap(int w, int h, std::uint8_t fill = kNodataClass, GeoTransform g = {})
        : width_tiles(w), height_tiles(h), cells(static_cast<std::size_t>(w) * h, fill), geo(g) {
        validate();
    }

    std::uint8_t at(int row, int col) const noexcept { return cells[static_cast<std::size_t>(row) * width_tiles + col]; }
    std::uint8_t& at(int row, int col) noexcept { return cells[static_cast<std::size_t>(row) * width_tiles + col]; }

    void validate() const {
        if (width_tiles < 0 || height_tiles < 0) fail(ErrorCode::InvalidArgument, "negative map dimensions");
        if (cells.size() != static_cast<std::size_t>(width_tiles) * height_tiles)
            fail(ErrorCode::HeaderMismatch, "cell count does not equal width_tiles*height_tiles");
        for (auto v : cells)
            if (v != kNodataClass && !is_valid_label(v))
                fail(ErrorCode::InvalidArgument, "cell value " + std::to_string(v) + " is not a class id");
    }

    friend bool operator==(const ClassMap&, const ClassMap&) = default;
};

// ---------------------------------------------------------------------------
// CMAP file: "CMAP" | u32 LE header length | JSON | cells

inline constexpr std::string_view kClassMapMagic = "CMAP";

inline nlohmann::json to_json(const GeoTransform& g) {
    return {{"origin_x", g.origin_x}, {"origin_y", g.origin_y}, {"pixel_size_x", g.pixel_size_x},
            {"pixel_size_y", g.pixel_size_y}};
}

inline GeoTransform geo_from_json(const nlohmann::json& j) {
    return {j.at("origin_x").get<double>(), j.at("origin_y").get<double>(), j.at("pixel_size_x").get<double>(),
            j.at("pixel_size_y").get<double>()};
}

inline std::string encode_class_map(const ClassMap& m) {
    m.validate();
    nlohmann::json h;
    h["width_tiles"] = m.width_tiles;
    h["height_tiles"] = m.height_tiles;
    h["geo"] = to_json(m.geo);
    h["year_tag"] = m.year_tag ? nlohmann::json(*m.year_tag) : nlohmann::json(nullptr);
    h["class_names"] = kClassNames;
    return detail::encode_container(kClassMapMagic, h, std::string(m.cells.begin(), m.cells.end()));
}

inline ClassMap decode_class_map(std::string_view bytes) {
    const auto c = detail::decode_container(bytes, kClassMapMagic);
    ClassMap m;
    try {
        m.width_tiles = c.header.at("width_tiles").get<int>();
        m.height_tiles = c.header.at("height_tiles").get<int>();
        m.geo = geo_from_json(c.header.at("geo"));
        if (!c.header.at("year_tag").is_null()) m.year_tag = c.header.at("year_tag").get<std::string>();
        if (c.header.at("class_names") != nlohmann::json(kClassNames))
            fail(ErrorCode::HeaderMismatch, "class map uses a different class list");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("class map header: ") + e.what());
    }
    if (m.width_tiles < 0 || m.height_tiles < 0) fail(ErrorCode::HeaderMismatch, "negative map dimensions");
    if (c.payload.size() != static_cast<std::size_t>(m.width_tiles) * m.height_tiles)
        fail(ErrorCode::HeaderMismatch, "class map payload is " + std::to_string(c.payload.size()) + " bytes, header declares " +
                                            std::to_string(m.width_tiles) + "x" + std::to_string(m.height_tiles));
    m.cells.assign(c.payload.begin(), c.payload.end());
    m.validate();
    return m;
}

inline void write_class_map(const ClassMap& m, const std::filesystem::path& path) {
    detail::write_file(path, encode_class_map(m));
}

inline ClassMap read_class_map(const std::filesystem::path& path) { return decode_class_map(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Whole-raster classification

struct ClassifyOptions {
    std::size_t batch_size = 64;
    bool strict_resolution = false;    // ResolutionMismatch becomes an error instead of a warning
    double resolution_tolerance = 1e-6;  // relative
    std::function<void(const std::string&)> warn;  // receives warnings; silent if empty
};

namespace detail {

inline bool mostly_nodata(const Tile& t, std::optional<std::uint16_t> nodata) {
    if (!nodata) return false;
    std::size_t bad = 0;
    for (std::size_t p = 0; p < kTilePixels; ++p) {
        for (int b = 0; b < kBands; ++b)
            if (t.data[b * kTilePixels + p] == *nodata) {
                ++bad;
                break;
            }
    }
    return 2 * bad > kTilePixels;
}

inline void check_resolution(const Raster4B& r, const nn::Checkpoint& ck, const ClassifyOptions& opt) {
    if (!ck.pixel_size) return;
    const double want = *ck.pixel_size;
    for (double got : {r.geo().pixel_size_x, r.geo().pixel_size_y}) {
        if (std::abs(got - want) <= opt.resolution_tolerance * want) continue;
        const std::string msg = "raster pixel size " + std::to_string(got) + " differs from training resolution " +
                                std::to_string(want);
        if (opt.strict_resolution) fail(ErrorCode::ResolutionMismatch, msg);
        if (opt.warn) opt.warn(msg);
        return;
    }
}

} // namespace detail

/// Pads to a multiple of 32, dices, classifies every tile and reassembles
/// the map. Tiles with more than half their pixels nodata become 255.
inline ClassMap classify_raster(const Raster4B& raster, nn::Model<float>& model, const nn::Checkpoint& ck,
                                const ClassifyOptions& opt = {}) {
    if (!(model.config() == ck.arch)) fail(ErrorCode::ArchMismatch, "model does not match checkpoint");
    detail::check_resolution(raster, ck, opt);
    const auto padded = pad_to_multiple(raster, kTileSize);
    const auto tiles = dice(padded);
    const auto& g = raster.geo();
    ClassMap map(padded.width() / kTileSize, padded.height() / kTileSize, kNodataClass,
                 GeoTransform{g.origin_x, g.origin_y, g.pixel_size_x * kTileSize, g.pixel_size_y * kTileSize});

    std::vector<const Tile*> valid;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        if (detail::mostly_nodata(tiles[i], raster.nodata())) continue;
        valid.push_back(&tiles[i]);
        where.push_back(i);
    }
    const auto pred = nn::predict(model, valid, ck.band_stats, opt.batch_size, raster.nodata());
    for (std::size_t j = 0; j < pred.size(); ++j) map.cells[where[j]] = static_cast<std::uint8_t>(pred[j]);
    return map;
}

inline ClassMap classify_raster(const Raster4B& raster, const nn::Checkpoint& ck, const ClassifyOptions& opt = {}) {
    auto model = nn::model_from_checkpoint(ck);
    return classify_raster(raster, model, ck, opt);
}

// ---------------------------------------------------------------------------
// 3x3 majority filter

/// Single pass. Votes come from in-bounds, non-nodata cells of the 3x3
/// window including the center; ties go to the lowest class id. Nodata cells
/// are left alone.
inline ClassMap majority_filter(const ClassMap& in) {
    ClassMap out = in;
    for (int r = 0; r < in.height_tiles; ++r)
        for (int c = 0; c < in.width_tiles; ++c) {
            if (in.at(r, c) == kNodataClass) continue;
            std::array<int, kNumClasses> votes{};
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= in.height_tiles || cc >= in.width_tiles) continue;
                    const auto v = in.at(rr, cc);
                    if (v != kNodataClass) ++votes[v];
                }
            int best = 0;
            for (int k = 1; k < kNumClasses; ++k)
                if (votes[k] > votes[best]) best = k;
            out.at(r, c) = static_cast<std::uint8_t>(best);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

using Rgb = std::array<std::uint8_t, 3>;

struct Palette {
    std::array<Rgb, kNumClasses> classes;
    Rgb nodata;
};

inline constexpr Palette kDefaultPalette{{{
                                             {0, 100, 0},      // Conifer, dark green
                                             {144, 238, 144},  // Hardwood, light green
                                             {210, 180, 140},  // Shrub, tan
                                             {0, 205, 160},    // ReforestedTree, cyan-green
                                             {139, 69, 19},    // Barren, brown
                                         }},
                                         {0, 0, 0}};

inline const Rgb& color_of(std::uint8_t cell, const Palette& p) {
    return cell == kNodataClass ? p.nodata : p.classes.at(cell);
}

/// Binary PPM (P6), one pixel per cell.
inline std::string render_map(const ClassMap& map, const Palette& palette = kDefaultPalette) {
    map.validate();
    std::string out = "P6\n" + std::to_string(map.width_tiles) + " " + std::to_string(map.height_tiles) + "\n255\n";
    out.reserve(out.size() + map.cells.size() * 3);
    for (auto v : map.cells) {
        const auto& rgb = color_of(v, palette);
        out.append(reinterpret_cast<const char*>(rgb.data()), 3);
    }
    return out;
}

inline void write_ppm(const ClassMap& map, const std::filesystem::path& path, const Palette& palette = kDefaultPalette) {
    detail::write_file(path, render_map(map, palette));
}

} // namespace landcover
