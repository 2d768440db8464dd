#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "landcover/dataset.hpp"
#include "landcover/inference.hpp"
#include "landcover/raster.hpp"
#include "landcover/rng.hpp"

namespace landcover::synth {

// Band order is R, G, B, NIR.
inline constexpr double kNoiseSigma = 20.0;
inline constexpr double kSceneTileSize = 0.6;

inline std::array<double, kBands> signature(int k) {
    return {160.0 - 25.0 * k, 100.0, 100.0, 40.0 + 30.0 * k};
}

/// u8 tile with the class-k band means plus Gaussian noise, rounded and clipped.
inline Tile signature_tile(int k, Rng& rng) {
    const auto mu = signature(k);
    Tile t;
    for (int b = 0; b < kBands; ++b)
        for (std::size_t p = 0; p < kTilePixels; ++p) {
            const double v = std::floor(mu[b] + kNoiseSigma * rng.normal() + 0.5);
            t.data[b * kTilePixels + p] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 255.0));
        }
    return t;
}

struct DatasetSize {
    std::size_t train = 2500;
    std::size_t val = 500;
    std::size_t test = 500;
};

/// Balanced dataset with fixed split tags; sample i of a split has class i mod 5.
inline Manifest make_dataset(std::uint64_t seed, DatasetSize size = {}) {
    Manifest m;
    m.seed = seed;
    m.dtype = SampleType::U8;
    const std::array<std::pair<Split, std::size_t>, 3> parts{
        {{Split::Train, size.train}, {Split::Val, size.val}, {Split::Test, size.test}}};
    for (const auto& [which, n] : parts) {
        for (std::size_t i = 0; i < n; ++i) {
            const int k = static_cast<int>(i % kNumClasses);
            Rng rng(stream_seed(seed, 0x53594e54, static_cast<std::uint64_t>(which), i));
            Sample s;
            s.tile = signature_tile(k, rng);
            s.label = class_from_int(k);
            s.source_id = "synth-" + std::string(to_string(which));
            s.mean_ndvi = ndvi(s.tile).mean();
            m.samples.push_back(std::move(s));
            m.splits.push_back(which);
        }
    }
    m.band_stats = compute_band_stats(m, Split::Train);
    return m;
}

// ---------------------------------------------------------------------------
// 320x320 scene on a 10x10 tile layout

inline constexpr int kSceneTiles = 10;

/// Upper half: Conifer | Hardwood | Shrub in 4/3/3 columns.
/// Lower half: ReforestedTree | Barren in 5/5 columns.
inline int scene_class(int row, int col) {
    if (row < 5) return col < 4 ? 0 : col < 7 ? 1 : 2;
    return col < 5 ? 3 : 4;
}

inline ClassMap scene_layout() {
    ClassMap m(kSceneTiles, kSceneTiles, 0,
               GeoTransform{0.0, kSceneTiles * kTileSize * kSceneTileSize, kSceneTileSize * kTileSize,
                            kSceneTileSize * kTileSize});
    for (int r = 0; r < kSceneTiles; ++r)
        for (int c = 0; c < kSceneTiles; ++c) m.at(r, c) = static_cast<std::uint8_t>(scene_class(r, c));
    return m;
}

inline Raster4B make_scene(std::uint64_t seed) {
    const int side = kSceneTiles * kTileSize;
    Raster4B r(side, side, SampleType::U8, GeoTransform{0.0, side * kSceneTileSize, kSceneTileSize, kSceneTileSize});
    for (int tr = 0; tr < kSceneTiles; ++tr)
        for (int tc = 0; tc < kSceneTiles; ++tc) {
            Rng rng(stream_seed(seed, 0x5343454e, static_cast<std::uint64_t>(tr), static_cast<std::uint64_t>(tc)));
            const Tile t = signature_tile(scene_class(tr, tc), rng);
            for (int b = 0; b < kBands; ++b)
                for (int y = 0; y < kTileSize; ++y)
                    for (int x = 0; x < kTileSize; ++x) r.at(b, tr * kTileSize + y, tc * kTileSize + x) = t.at(b, y, x);
        }
    return r;
}

} // namespace landcover::synth
