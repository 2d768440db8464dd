#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/detail/binary_io.hpp"
#include "landcover/error.hpp"
#include "landcover/geometry.hpp"
#include "landcover/raster.hpp"
#include "landcover/rng.hpp"

namespace landcover {

inline constexpr int kNumClasses = 5;

enum class ClassId : std::uint8_t {
    Conifer = 0,
    Hardwood = 1,
    Shrub = 2,
    ReforestedTree = 3,
    Barren = 4,
    Nodata = 255,
};

inline constexpr std::uint8_t kNodataClass = 255;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"Conifer", "Hardwood", "Shrub",
                                                                         "ReforestedTree", "Barren"};

constexpr bool is_valid_label(int v) noexcept { return v >= 0 && v < kNumClasses; }

inline std::string_view class_name(ClassId c) {
    const int v = static_cast<int>(c);
    if (!is_valid_label(v)) return "nodata";
    return kClassNames[v];
}

inline ClassId class_from_name(std::string_view name) {
    for (int k = 0; k < kNumClasses; ++k)
        if (kClassNames[k] == name) return static_cast<ClassId>(k);
    fail(ErrorCode::InvalidArgument, "unknown class name '" + std::string(name) + "'");
}

inline ClassId class_from_int(int v) {
    if (!is_valid_label(v)) fail(ErrorCode::InvalidArgument, "label " + std::to_string(v) + " outside 0..4");
    return static_cast<ClassId>(v);
}

struct LabelPolygon {
    Polygon polygon;
    ClassId class_id = ClassId::Conifer;
    double density = 1.0;

    void validate() const {
        polygon.validate();
        if (!is_valid_label(static_cast<int>(class_id))) fail(ErrorCode::InvalidArgument, "polygon label outside 0..4");
        if (!(density >= 0.0 && density <= 1.0)) fail(ErrorCode::InvalidArgument, "density outside [0,1]");
    }
};

/// Polygons from a FeatureCollection whose features carry
/// {"class_name": <one of the five names>, "density": <number>}.
inline std::vector<LabelPolygon> parse_label_polygons(const std::string& geojson) {
    std::vector<LabelPolygon> out;
    for (auto& f : parse_feature_collection(geojson)) {
        if (!f.properties.contains("class_name") || !f.properties.contains("density"))
            fail(ErrorCode::InvalidArgument, "label feature needs class_name and density properties");
        LabelPolygon lp{std::move(f.polygon), class_from_name(f.properties["class_name"].get<std::string>()),
                        f.properties["density"].get<double>()};
        lp.validate();
        out.push_back(std::move(lp));
    }
    return out;
}

inline std::vector<LabelPolygon> read_label_polygons(const std::filesystem::path& path) {
    return parse_label_polygons(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Configuration

/// Which tile points must lie inside a polygon for the tile to take its label.
struct CoverageRule {
    bool center = true;
    bool corners = true;
};

struct CurationConfig {
    double density_threshold = 0.6;
    double ndvi_threshold = 0.2;
    std::vector<ClassId> ndvi_filtered_classes = {ClassId::Conifer, ClassId::Hardwood};
    CoverageRule coverage_rule{};
    double target_pixel_size = 0.6;

    void validate() const {
        if (!(density_threshold >= 0.0 && density_threshold <= 1.0))
            fail(ErrorCode::Config, "density_threshold outside [0,1]");
        if (!(ndvi_threshold >= -1.0 && ndvi_threshold <= 1.0)) fail(ErrorCode::Config, "ndvi_threshold outside [-1,1]");
        if (!coverage_rule.center && !coverage_rule.corners)
            fail(ErrorCode::Config, "coverage_rule must test the centre, the corners, or both");
        if (!(target_pixel_size > 0.0)) fail(ErrorCode::Config, "target_pixel_size must be > 0");
    }

    bool ndvi_filtered(ClassId c) const {
        return std::find(ndvi_filtered_classes.begin(), ndvi_filtered_classes.end(), c) != ndvi_filtered_classes.end();
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
    if (!j.is_object()) fail(ErrorCode::Config, where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(ErrorCode::Config, "unknown key '" + key + "' in " + where);
}

} // namespace detail

inline nlohmann::json to_json(const CurationConfig& c) {
    nlohmann::json classes = nlohmann::json::array();
    for (auto k : c.ndvi_filtered_classes) classes.push_back(std::string(class_name(k)));
    return {{"density_threshold", c.density_threshold},
            {"ndvi_threshold", c.ndvi_threshold},
            {"ndvi_filtered_classes", classes},
            {"coverage_rule", {{"center", c.coverage_rule.center}, {"corners", c.coverage_rule.corners}}},
            {"target_pixel_size", c.target_pixel_size}};
}

inline CurationConfig curation_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"density_threshold", "ndvi_threshold", "ndvi_filtered_classes", "coverage_rule", "target_pixel_size"},
        "curation");
    CurationConfig c;
    try {
        c.density_threshold = j.value("density_threshold", c.density_threshold);
        c.ndvi_threshold = j.value("ndvi_threshold", c.ndvi_threshold);
        c.target_pixel_size = j.value("target_pixel_size", c.target_pixel_size);
        if (j.contains("ndvi_filtered_classes")) {
            c.ndvi_filtered_classes.clear();
            for (const auto& n : j["ndvi_filtered_classes"])
                c.ndvi_filtered_classes.push_back(class_from_name(n.get<std::string>()));
        }
        if (j.contains("coverage_rule")) {
            const auto& r = j["coverage_rule"];
            detail::reject_unknown_keys(r, {"center", "corners"}, "curation.coverage_rule");
            c.coverage_rule.center = r.value("center", true);
            c.coverage_rule.corners = r.value("corners", true);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("curation: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Samples and manifests

struct Sample {
    Tile tile;
    ClassId label = ClassId::Conifer;
    std::string source_id;
    double mean_ndvi = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split : std::uint8_t { Train, Val, Test };

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

inline Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    fail(ErrorCode::InvalidArgument, "unknown split '" + std::string(s) + "'");
}

struct BandStats {
    std::array<double, kBands> mean{};
    std::array<double, kBands> stddev{1.0, 1.0, 1.0, 1.0};

    friend bool operator==(const BandStats&, const BandStats&) = default;
};

inline nlohmann::json to_json(const BandStats& s) {
    return {{"mean", s.mean}, {"std", s.stddev}};
}

inline BandStats band_stats_from_json(const nlohmann::json& j) {
    BandStats s;
    s.mean = j.at("mean").get<std::array<double, kBands>>();
    s.stddev = j.at("std").get<std::array<double, kBands>>();
    return s;
}

/// Curated dataset: samples with split tags and train-split band statistics.
struct Manifest {
    std::vector<Sample> samples;
    std::vector<Split> splits;
    BandStats band_stats{};
    CurationConfig config{};
    std::uint64_t seed = 0;
    SampleType dtype = SampleType::U8;

    std::size_t count(Split s) const { return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), s)); }

    std::vector<std::size_t> indices(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < splits.size(); ++i)
            if (splits[i] == s) idx.push_back(i);
        return idx;
    }

    std::array<std::size_t, kNumClasses> class_counts() const {
        std::array<std::size_t, kNumClasses> c{};
        for (const auto& s : samples) ++c[static_cast<int>(s.label)];
        return c;
    }

    friend bool operator==(const Manifest& a, const Manifest& b) {
        return a.samples == b.samples && a.splits == b.splits && a.band_stats == b.band_stats && a.seed == b.seed &&
               a.dtype == b.dtype && to_json(a.config) == to_json(b.config);
    }
};

/// Population mean / standard deviation per band over the chosen split.
/// Sums are accumulated exactly in integers, so the result does not depend
/// on sample order.
inline BandStats compute_band_stats(const Manifest& m, Split which = Split::Train) {
    std::array<std::uint64_t, kBands> s1{};
    std::array<unsigned __int128, kBands> s2{};
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        if (m.splits[i] != which) continue;
        const auto& t = m.samples[i].tile;
        for (int b = 0; b < kBands; ++b)
            for (std::size_t p = 0; p < kTilePixels; ++p) {
                const std::uint64_t v = t.data[b * kTilePixels + p];
                s1[b] += v;
                s2[b] += static_cast<unsigned __int128>(v * v);
            }
        n += kTilePixels;
    }
    BandStats st;
    if (n == 0) return st;
    for (int b = 0; b < kBands; ++b) {
        const long double mean = static_cast<long double>(s1[b]) / n;
        const long double var = static_cast<long double>(s2[b]) / n - mean * mean;
        st.mean[b] = static_cast<double>(mean);
        st.stddev[b] = static_cast<double>(std::sqrt(std::max(var, 0.0L)));
    }
    return st;
}

// ---------------------------------------------------------------------------
// Curation

struct NamedRaster {
    std::string id;
    Raster4B raster;
};

struct CurationReport {
    Manifest manifest;
    std::size_t candidate_tiles = 0;   // tiles matched by at least one eligible polygon
    std::size_t conflicts = 0;         // tiles matched by polygons of different classes
    std::size_t ndvi_rejected = 0;
    std::size_t nodata_rejected = 0;   // tiles containing nodata pixels
    std::size_t density_rejected = 0;  // polygons below the density threshold
};

inline bool tile_covered(const LabelPolygon& lp, const GeoTransform& geo, const Tile& t, const CoverageRule& rule) {
    const double c0 = t.origin_col, r0 = t.origin_row;
    auto inside = [&](double col, double row) { return contains(lp.polygon, {geo.x_at(col), geo.y_at(row)}); };
    if (rule.center && !inside(c0 + kTileSize / 2.0, r0 + kTileSize / 2.0)) return false;
    if (rule.corners) {
        if (!inside(c0, r0) || !inside(c0 + kTileSize, r0) || !inside(c0, r0 + kTileSize) ||
            !inside(c0 + kTileSize, r0 + kTileSize))
            return false;
    }
    return true;
}

/// Dices every raster and labels each tile from the polygon(s) covering it.
/// Output order: raster order, then row-major tile order. The returned
/// manifest is unsplit (every sample tagged train).
inline CurationReport curate(std::span<const NamedRaster> rasters, std::span<const LabelPolygon> polygons,
                             const CurationConfig& cfg) {
    cfg.validate();
    CurationReport rep;
    rep.manifest.config = cfg;

    std::vector<const LabelPolygon*> eligible;
    for (const auto& lp : polygons) {
        lp.validate();
        if (lp.density >= cfg.density_threshold)
            eligible.push_back(&lp);
        else
            ++rep.density_rejected;
    }

    bool any_u16 = false;
    for (const auto& nr : rasters) any_u16 = any_u16 || nr.raster.dtype() == SampleType::U16LE;
    rep.manifest.dtype = any_u16 ? SampleType::U16LE : SampleType::U8;

    for (const auto& nr : rasters) {
        for (auto& tile : dice(nr.raster)) {
            std::optional<ClassId> label;
            bool conflict = false;
            for (const auto* lp : eligible) {
                if (!tile_covered(*lp, nr.raster.geo(), tile, cfg.coverage_rule)) continue;
                if (label && *label != lp->class_id) conflict = true;
                if (!label) label = lp->class_id;
            }
            if (!label) continue;
            ++rep.candidate_tiles;
            if (conflict) {
                ++rep.conflicts;
                continue;
            }
            bool has_nodata = false;
            for (int r = 0; r < kTileSize && !has_nodata; ++r)
                for (int c = 0; c < kTileSize && !has_nodata; ++c)
                    has_nodata = nr.raster.is_nodata(tile.origin_row + r, tile.origin_col + c);
            if (has_nodata) {
                ++rep.nodata_rejected;
                continue;
            }
            const double mean_ndvi = ndvi(tile).mean();
            if (cfg.ndvi_filtered(*label) && mean_ndvi < cfg.ndvi_threshold) {
                ++rep.ndvi_rejected;
                continue;
            }
            rep.manifest.samples.push_back(Sample{std::move(tile), *label, nr.id, mean_ndvi});
        }
    }

    if (rep.manifest.samples.empty()) {
        if (rep.candidate_tiles > 0 && rep.conflicts == rep.candidate_tiles)
            fail(ErrorCode::OverlapConflict,
                 "all " + std::to_string(rep.conflicts) + " candidate tiles matched polygons of different classes");
        fail(ErrorCode::EmptyResult, "no samples survived curation; check thresholds and polygon coverage");
    }
    rep.manifest.splits.assign(rep.manifest.samples.size(), Split::Train);
    rep.manifest.band_stats = compute_band_stats(rep.manifest);
    return rep;
}

// ---------------------------------------------------------------------------
// Stratified split

namespace detail {

/// Largest-remainder apportionment of `total` over classes proportional to
/// `weights`, never exceeding `caps`. Ties go to the lower class id.
inline std::array<std::size_t, kNumClasses> apportion(std::size_t total,
                                                      const std::array<std::size_t, kNumClasses>& weights,
                                                      const std::array<std::size_t, kNumClasses>& caps) {
    std::array<std::size_t, kNumClasses> out{};
    std::size_t wsum = 0;
    for (auto w : weights) wsum += w;
    if (wsum == 0 || total == 0) return out;
    std::array<std::pair<std::uint64_t, int>, kNumClasses> rema{};
    std::size_t given = 0;
    for (int k = 0; k < kNumClasses; ++k) {
        const unsigned __int128 num = static_cast<unsigned __int128>(total) * weights[k];
        out[k] = std::min<std::size_t>(static_cast<std::size_t>(num / wsum), caps[k]);
        rema[k] = {static_cast<std::uint64_t>(num % wsum), k};
        given += out[k];
    }
    std::stable_sort(rema.begin(), rema.end(), [](auto a, auto b) { return a.first > b.first; });
    for (const auto& [r, k] : rema) {
        if (given == total) break;
        if (out[k] < caps[k] && weights[k] > 0) {
            ++out[k];
            ++given;
        }
    }
    for (int k = 0; k < kNumClasses && given < total; ++k)
        while (given < total && out[k] < caps[k]) {
            ++out[k];
            ++given;
        }
    return out;
}

} // namespace detail

/// Split tags for samples with the given labels: per class, a seeded shuffle
/// puts the first val_k samples in val and the next test_k in test, where
/// val_k / test_k are proportional to class frequency.
inline std::vector<Split> split_assignment(std::span<const ClassId> labels, std::uint64_t seed, std::size_t n_val,
                                           std::size_t n_test) {
    if (n_val + n_test >= labels.size())
        fail(ErrorCode::InsufficientSamples, "n_val + n_test = " + std::to_string(n_val + n_test) + " but only " +
                                                 std::to_string(labels.size()) + " samples");
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int k = static_cast<int>(labels[i]);
        if (!is_valid_label(k)) fail(ErrorCode::InvalidArgument, "sample label outside 0..4");
        by_class[k].push_back(i);
    }
    std::array<std::size_t, kNumClasses> counts{};
    for (int k = 0; k < kNumClasses; ++k) counts[k] = by_class[k].size();

    const auto val = detail::apportion(n_val, counts, counts);
    std::array<std::size_t, kNumClasses> room{};
    for (int k = 0; k < kNumClasses; ++k) room[k] = counts[k] - val[k];
    const auto test = detail::apportion(n_test, counts, room);

    std::vector<Split> tags(labels.size(), Split::Train);
    for (int k = 0; k < kNumClasses; ++k) {
        auto& idx = by_class[k];
        Rng rng(stream_seed(seed, 0x5350u, static_cast<std::uint64_t>(k)));
        rng.shuffle(std::span(idx));
        for (std::size_t i = 0; i < val[k]; ++i) tags[idx[i]] = Split::Val;
        for (std::size_t i = 0; i < test[k]; ++i) tags[idx[val[k] + i]] = Split::Test;
    }
    return tags;
}

inline Manifest split(Manifest m, std::uint64_t seed, std::size_t n_val, std::size_t n_test) {
    std::vector<ClassId> labels;
    labels.reserve(m.samples.size());
    for (const auto& s : m.samples) labels.push_back(s.label);
    m.splits = split_assignment(labels, seed, n_val, n_test);
    m.seed = seed;
    m.band_stats = compute_band_stats(m, Split::Train);
    return m;
}

// ---------------------------------------------------------------------------
// Augmentation

inline constexpr int kCropPad = 4;

struct AugmentDraw {
    bool flip_h = false;
    bool flip_v = false;
    int rot_k = 0;           // counter-clockwise quarter turns
    int crop_x = kCropPad;   // window offset into the padded tile, 0..2*kCropPad
    int crop_y = kCropPad;
};

inline AugmentDraw draw_augment(Rng& rng) {
    AugmentDraw d;
    d.flip_h = rng.coin();
    d.flip_v = rng.coin();
    d.rot_k = static_cast<int>(rng.uniform_below(4));
    d.crop_x = static_cast<int>(rng.uniform_below(2 * kCropPad + 1));
    d.crop_y = static_cast<int>(rng.uniform_below(2 * kCropPad + 1));
    return d;
}

inline Tile flip_horizontal(const Tile& t) {
    Tile o = t;
    for (int b = 0; b < kBands; ++b)
        for (int r = 0; r < kTileSize; ++r)
            for (int c = 0; c < kTileSize; ++c) o.at(b, r, c) = t.at(b, r, kTileSize - 1 - c);
    return o;
}

inline Tile flip_vertical(const Tile& t) {
    Tile o = t;
    for (int b = 0; b < kBands; ++b)
        for (int r = 0; r < kTileSize; ++r)
            for (int c = 0; c < kTileSize; ++c) o.at(b, r, c) = t.at(b, kTileSize - 1 - r, c);
    return o;
}

/// Rotates by k quarter turns counter-clockwise.
inline Tile rotate90(const Tile& t, int k) {
    k = ((k % 4) + 4) % 4;
    Tile o = t;
    constexpr int n = kTileSize - 1;
    for (int b = 0; b < kBands; ++b)
        for (int r = 0; r < kTileSize; ++r)
            for (int c = 0; c < kTileSize; ++c) {
                std::uint16_t v = t.at(b, r, c);
                switch (k) {
                case 0: v = t.at(b, r, c); break;
                case 1: v = t.at(b, c, n - r); break;
                case 2: v = t.at(b, n - r, n - c); break;
                case 3: v = t.at(b, n - c, r); break;
                }
                o.at(b, r, c) = v;
            }
    return o;
}

/// Reflect-pads by kCropPad (edge not repeated) and takes the 32x32 window
/// at (crop_x, crop_y) in padded coordinates.
inline Tile reflect_crop(const Tile& t, int crop_x, int crop_y) {
    auto reflect = [](int p) { return p < 0 ? -p : (p >= kTileSize ? 2 * (kTileSize - 1) - p : p); };
    Tile o = t;
    for (int b = 0; b < kBands; ++b)
        for (int r = 0; r < kTileSize; ++r)
            for (int c = 0; c < kTileSize; ++c)
                o.at(b, r, c) = t.at(b, reflect(r + crop_y - kCropPad), reflect(c + crop_x - kCropPad));
    return o;
}

inline Tile apply_augment(const Tile& t, const AugmentDraw& d) {
    Tile o = t;
    if (d.flip_h) o = flip_horizontal(o);
    if (d.flip_v) o = flip_vertical(o);
    if (d.rot_k) o = rotate90(o, d.rot_k);
    if (d.crop_x != kCropPad || d.crop_y != kCropPad) o = reflect_crop(o, d.crop_x, d.crop_y);
    return o;
}

inline Sample augment(const Sample& s, Rng& rng) {
    Sample out = s;
    out.tile = apply_augment(s.tile, draw_augment(rng));
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

inline void check_stats(const BandStats& st) {
    for (int b = 0; b < kBands; ++b)
        if (!(st.stddev[b] > 0.0) || !std::isfinite(st.mean[b]))
            fail(ErrorCode::DegenerateStats, "band " + std::to_string(b) + " has non-positive standard deviation");
}

/// out[c] = (tile[c] - mean[c]) / std[c]. Pixels equal to `nodata` in any
/// band map to 0 (the band mean) in all channels.
template <class T>
void normalize_into(const Tile& t, const BandStats& st, std::span<T> out,
                    std::optional<std::uint16_t> nodata = std::nullopt) {
    check_stats(st);
    if (out.size() != kTileSamples) fail(ErrorCode::ShapeMismatch, "normalize output must hold 4x32x32 values");
    for (int b = 0; b < kBands; ++b)
        for (std::size_t p = 0; p < kTilePixels; ++p)
            out[b * kTilePixels + p] = static_cast<T>((t.data[b * kTilePixels + p] - st.mean[b]) / st.stddev[b]);
    if (nodata) {
        for (std::size_t p = 0; p < kTilePixels; ++p) {
            bool missing = false;
            for (int b = 0; b < kBands; ++b) missing = missing || t.data[b * kTilePixels + p] == *nodata;
            if (missing)
                for (int b = 0; b < kBands; ++b) out[b * kTilePixels + p] = T(0);
        }
    }
}

inline std::vector<float> normalize(const Tile& t, const BandStats& st) {
    std::vector<float> out(kTileSamples);
    normalize_into<float>(t, st, out);
    return out;
}

// ---------------------------------------------------------------------------
// Manifest files (JSON Lines + raw tile payload)

inline constexpr std::string_view kManifestFormat = "landcover-manifest";

/// First line of a manifest file.
struct ManifestMeta {
    std::array<std::size_t, kNumClasses> per_class{};
    std::size_t total = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
    BandStats band_stats{};
    CurationConfig config{};
    std::uint64_t seed = 0;
    SampleType dtype = SampleType::U8;
    std::string tile_file = "tiles.bin";

    void validate() const {
        std::size_t sum = 0;
        for (auto c : per_class) sum += c;
        if (sum != total) fail(ErrorCode::HeaderMismatch, "per-class counts do not sum to total");
        if (train + val + test != total) fail(ErrorCode::HeaderMismatch, "split counts do not sum to total");
        check_stats(band_stats);
        config.validate();
        if (tile_file.empty()) fail(ErrorCode::HeaderMismatch, "empty tile_file");
    }
};

inline nlohmann::json to_json(const ManifestMeta& m) {
    nlohmann::json names = nlohmann::json::array();
    for (auto n : kClassNames) names.push_back(std::string(n));
    return {{"format", std::string(kManifestFormat)},
            {"version", 1},
            {"class_names", names},
            {"counts",
             {{"per_class", m.per_class}, {"total", m.total}, {"train", m.train}, {"val", m.val}, {"test", m.test}}},
            {"band_stats", to_json(m.band_stats)},
            {"config", to_json(m.config)},
            {"seed", m.seed},
            {"dtype", to_string(m.dtype)},
            {"tile_file", m.tile_file}};
}

inline ManifestMeta manifest_meta_from_json(const nlohmann::json& j) {
    ManifestMeta m;
    try {
        detail::reject_unknown_keys(
            j, {"format", "version", "class_names", "counts", "band_stats", "config", "seed", "dtype", "tile_file"},
            "manifest metadata");
        if (j.at("format").get<std::string>() != kManifestFormat)
            fail(ErrorCode::BadMagic, "not a landcover manifest");
        if (j.at("version").get<int>() != 1) fail(ErrorCode::HeaderMismatch, "unsupported manifest version");
        const auto names = j.at("class_names").get<std::vector<std::string>>();
        if (names.size() != kNumClasses || !std::equal(names.begin(), names.end(), kClassNames.begin()))
            fail(ErrorCode::HeaderMismatch, "class_names differ from the five land-cover classes");
        const auto& c = j.at("counts");
        detail::reject_unknown_keys(c, {"per_class", "total", "train", "val", "test"}, "manifest counts");
        m.per_class = c.at("per_class").get<std::array<std::size_t, kNumClasses>>();
        m.total = c.at("total").get<std::size_t>();
        m.train = c.at("train").get<std::size_t>();
        m.val = c.at("val").get<std::size_t>();
        m.test = c.at("test").get<std::size_t>();
        m.band_stats = band_stats_from_json(j.at("band_stats"));
        m.config = curation_config_from_json(j.at("config"));
        m.seed = j.at("seed").get<std::uint64_t>();
        m.dtype = sample_type_from_string(j.at("dtype").get<std::string>());
        m.tile_file = j.at("tile_file").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("manifest metadata: ") + e.what());
    }
    m.validate();
    return m;
}

inline ManifestMeta meta_of(const Manifest& m, std::string tile_file) {
    ManifestMeta meta;
    meta.per_class = m.class_counts();
    meta.total = m.samples.size();
    meta.train = m.count(Split::Train);
    meta.val = m.count(Split::Val);
    meta.test = m.count(Split::Test);
    meta.band_stats = m.band_stats;
    meta.config = m.config;
    meta.seed = m.seed;
    meta.dtype = m.dtype;
    meta.tile_file = std::move(tile_file);
    return meta;
}

/// Writes `path` (JSON Lines) and the tile payload next to it. The payload
/// file name is stored relative to the manifest's directory.
inline void write_manifest(const Manifest& m, const std::filesystem::path& path, const std::string& tile_file) {
    if (m.samples.size() != m.splits.size()) fail(ErrorCode::InvalidArgument, "split tags do not match samples");
    std::ostringstream lines;
    lines << to_json(meta_of(m, tile_file)).dump() << '\n';
    std::string payload;
    const std::size_t block = kTileSamples * sample_bytes(m.dtype);
    payload.reserve(block * m.samples.size());
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        const auto& s = m.samples[i];
        nlohmann::json rec = {{"tile_file", tile_file},
                              {"offset", i * block},
                              {"label", static_cast<int>(s.label)},
                              {"split", std::string(to_string(m.splits[i]))},
                              {"source_id", s.source_id},
                              {"mean_ndvi", s.mean_ndvi},
                              {"origin_col", s.tile.origin_col},
                              {"origin_row", s.tile.origin_row}};
        lines << rec.dump() << '\n';
        for (auto v : s.tile.data) {
            if (m.dtype == SampleType::U8) {
                if (v > 0xFF) fail(ErrorCode::UnsupportedDtype, "u16 sample in a u8 manifest");
                payload.push_back(static_cast<char>(v));
            } else {
                detail::put_u16_le(payload, v);
            }
        }
    }
    detail::write_file(path, lines.str());
    detail::write_file(path.parent_path() / tile_file, payload);
}

inline Manifest read_manifest(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::HeaderMismatch, "empty manifest");
    ManifestMeta meta;
    try {
        meta = manifest_meta_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::HeaderMismatch, std::string("manifest metadata: ") + e.what());
    }
    std::map<std::string, std::string> payloads;
    const std::size_t block = kTileSamples * sample_bytes(meta.dtype);

    Manifest m;
    m.band_stats = meta.band_stats;
    m.config = meta.config;
    m.seed = meta.seed;
    m.dtype = meta.dtype;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            const auto tile_file = rec.at("tile_file").get<std::string>();
            auto it = payloads.find(tile_file);
            if (it == payloads.end())
                it = payloads.emplace(tile_file, detail::read_file(path.parent_path() / tile_file)).first;
            const auto offset = rec.at("offset").get<std::size_t>();
            if (offset + block > it->second.size()) fail(ErrorCode::HeaderMismatch, "tile offset beyond payload");
            Sample s;
            const char* p = it->second.data() + offset;
            for (std::size_t i = 0; i < kTileSamples; ++i)
                s.tile.data[i] = meta.dtype == SampleType::U8 ? static_cast<unsigned char>(p[i])
                                                              : detail::get_u16_le(p + 2 * i);
            s.tile.origin_col = rec.value("origin_col", 0);
            s.tile.origin_row = rec.value("origin_row", 0);
            s.label = class_from_int(rec.at("label").get<int>());
            s.source_id = rec.at("source_id").get<std::string>();
            s.mean_ndvi = rec.at("mean_ndvi").is_null() ? std::nan("") : rec.at("mean_ndvi").get<double>();
            m.samples.push_back(std::move(s));
            m.splits.push_back(split_from_string(rec.at("split").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::HeaderMismatch, std::string("manifest record: ") + e.what());
        }
    }
    const auto check = meta_of(m, meta.tile_file);
    if (check.total != meta.total || check.per_class != meta.per_class || check.train != meta.train ||
        check.val != meta.val || check.test != meta.test)
        fail(ErrorCode::HeaderMismatch, "manifest records disagree with the metadata counts");
    return m;
}

} // namespace landcover
