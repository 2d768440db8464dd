#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/detail/binary_io.hpp"
#include "landcover/error.hpp"

namespace landcover {

inline constexpr int kBands = 4;
inline constexpr int kTileSize = 32;
inline constexpr std::size_t kTilePixels = kTileSize * kTileSize;
inline constexpr std::size_t kTileSamples = kTilePixels * kBands;

enum class Band : int { Red = 0, Green = 1, Blue = 2, Nir = 3 };

enum class SampleType { U8, U16LE };

constexpr std::uint16_t max_value(SampleType t) noexcept { return t == SampleType::U8 ? 0xFF : 0xFFFF; }
constexpr std::size_t sample_bytes(SampleType t) noexcept { return t == SampleType::U8 ? 1 : 2; }

inline std::string to_string(SampleType t) { return t == SampleType::U8 ? "u8" : "u16le"; }

inline SampleType sample_type_from_string(const std::string& s) {
    if (s == "u8") return SampleType::U8;
    if (s == "u16le") return SampleType::U16LE;
    fail(ErrorCode::UnsupportedDtype, "dtype '" + s + "'");
}

/// Maps pixel (col,row) to CRS coordinates. Rows advance southward, so y
/// decreases with the row index.
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = 1.0;

    double x_at(double col) const noexcept { return origin_x + col * pixel_size_x; }
    double y_at(double row) const noexcept { return origin_y - row * pixel_size_y; }

    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

/// Four-band (R,G,B,NIR) raster, band-sequential, row-major per band.
/// Samples are held as u16 for both dtypes; u8 rasters keep values <= 255.
class Raster4B {
public:
    Raster4B() = default;

    Raster4B(int width, int height, SampleType dtype, GeoTransform geo = {},
             std::optional<std::uint16_t> nodata = std::nullopt, std::string crs = {})
        : width_(width), height_(height), dtype_(dtype), geo_(geo), nodata_(nodata),
          crs_(std::move(crs)) {
        validate_shape();
        samples_.assign(static_cast<std::size_t>(width) * height * kBands, 0);
    }

    Raster4B(int width, int height, SampleType dtype, std::vector<std::uint16_t> samples,
             GeoTransform geo = {}, std::optional<std::uint16_t> nodata = std::nullopt,
             std::string crs = {})
        : width_(width), height_(height), dtype_(dtype), samples_(std::move(samples)), geo_(geo),
          nodata_(nodata), crs_(std::move(crs)) {
        validate_shape();
        if (samples_.size() != static_cast<std::size_t>(width) * height * kBands)
            fail(ErrorCode::HeaderMismatch, "sample buffer length does not equal width*height*4");
        const auto hi = max_value(dtype_);
        for (auto v : samples_)
            if (v > hi) fail(ErrorCode::InvalidArgument, "sample value exceeds dtype range");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    SampleType dtype() const noexcept { return dtype_; }
    const GeoTransform& geo() const noexcept { return geo_; }
    void set_geo(const GeoTransform& g) {
        geo_ = g;
        validate_shape();
    }
    std::optional<std::uint16_t> nodata() const noexcept { return nodata_; }
    void set_nodata(std::optional<std::uint16_t> v) noexcept { nodata_ = v; }
    const std::string& crs() const noexcept { return crs_; }
    void set_crs(std::string crs) { crs_ = std::move(crs); }

    std::size_t band_stride() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    std::uint16_t at(int band, int row, int col) const noexcept {
        return samples_[band * band_stride() + static_cast<std::size_t>(row) * width_ + col];
    }
    std::uint16_t& at(int band, int row, int col) noexcept {
        return samples_[band * band_stride() + static_cast<std::size_t>(row) * width_ + col];
    }

    std::span<const std::uint16_t> band(int b) const noexcept {
        return std::span(samples_).subspan(b * band_stride(), band_stride());
    }
    std::span<const std::uint16_t> samples() const noexcept { return samples_; }
    std::span<std::uint16_t> samples() noexcept { return samples_; }

    /// A pixel is nodata when any of its four bands holds the nodata value.
    bool is_nodata(int row, int col) const noexcept {
        if (!nodata_) return false;
        for (int b = 0; b < kBands; ++b)
            if (at(b, row, col) == *nodata_) return true;
        return false;
    }

    friend bool operator==(const Raster4B&, const Raster4B&) = default;

private:
    void validate_shape() const {
        if (width_ < 1 || height_ < 1) fail(ErrorCode::InvalidArgument, "raster dimensions must be >= 1");
        if (!(geo_.pixel_size_x > 0.0) || !(geo_.pixel_size_y > 0.0))
            fail(ErrorCode::InvalidArgument, "pixel sizes must be strictly positive");
    }

    int width_ = 1;
    int height_ = 1;
    SampleType dtype_ = SampleType::U8;
    std::vector<std::uint16_t> samples_ = std::vector<std::uint16_t>(kBands, 0);
    GeoTransform geo_{};
    std::optional<std::uint16_t> nodata_;
    std::string crs_;
};

/// A 32x32 four-band patch, channel-major.
struct Tile {
    std::array<std::uint16_t, kTileSamples> data{};
    int origin_col = 0;
    int origin_row = 0;

    std::uint16_t at(int band, int row, int col) const noexcept {
        return data[band * kTilePixels + row * kTileSize + col];
    }
    std::uint16_t& at(int band, int row, int col) noexcept {
        return data[band * kTilePixels + row * kTileSize + col];
    }

    friend bool operator==(const Tile&, const Tile&) = default;
};

// ---------------------------------------------------------------------------
// R4B container

inline constexpr std::string_view kR4BMagic = "R4B1\n";

inline std::string encode_r4b(const Raster4B& r) {
    nlohmann::json h;
    h["width"] = r.width();
    h["height"] = r.height();
    h["bands"] = kBands;
    h["dtype"] = to_string(r.dtype());
    h["origin_x"] = r.geo().origin_x;
    h["origin_y"] = r.geo().origin_y;
    h["pixel_size_x"] = r.geo().pixel_size_x;
    h["pixel_size_y"] = r.geo().pixel_size_y;
    h["crs"] = r.crs();
    h["nodata"] = r.nodata() ? nlohmann::json(*r.nodata()) : nlohmann::json(nullptr);

    std::string payload;
    payload.reserve(r.samples().size() * sample_bytes(r.dtype()));
    if (r.dtype() == SampleType::U8) {
        for (auto v : r.samples()) payload.push_back(static_cast<char>(v));
    } else {
        for (auto v : r.samples()) detail::put_u16_le(payload, v);
    }
    return detail::encode_container(kR4BMagic, h, payload);
}

inline Raster4B decode_r4b(std::string_view bytes) {
    const auto c = detail::decode_container(bytes, kR4BMagic);
    const auto& h = c.header;
    try {
        for (const char* key : {"width", "height", "bands", "dtype", "origin_x", "origin_y", "pixel_size_x",
                                "pixel_size_y", "crs", "nodata"})
            if (!h.contains(key)) fail(ErrorCode::HeaderMismatch, std::string("missing header key '") + key + "'");
        if (h.at("bands").get<int>() != kBands) fail(ErrorCode::HeaderMismatch, "bands must be 4");
        const SampleType dtype = sample_type_from_string(h.at("dtype").get<std::string>());
        const int w = h.at("width").get<int>();
        const int ht = h.at("height").get<int>();
        if (w < 1 || ht < 1) fail(ErrorCode::HeaderMismatch, "non-positive raster dimensions");
        const std::size_t n = static_cast<std::size_t>(w) * ht * kBands;
        if (c.payload.size() != n * sample_bytes(dtype))
            fail(ErrorCode::HeaderMismatch, "payload has " + std::to_string(c.payload.size()) + " bytes, header declares " +
                                                std::to_string(n * sample_bytes(dtype)));
        std::vector<std::uint16_t> samples(n);
        if (dtype == SampleType::U8) {
            for (std::size_t i = 0; i < n; ++i) samples[i] = static_cast<unsigned char>(c.payload[i]);
        } else {
            for (std::size_t i = 0; i < n; ++i) samples[i] = detail::get_u16_le(c.payload.data() + 2 * i);
        }
        GeoTransform geo{h.at("origin_x").get<double>(), h.at("origin_y").get<double>(),
                         h.at("pixel_size_x").get<double>(), h.at("pixel_size_y").get<double>()};
        std::optional<std::uint16_t> nodata;
        if (!h.at("nodata").is_null()) nodata = h.at("nodata").get<std::uint16_t>();
        return Raster4B(w, ht, dtype, std::move(samples), geo, nodata, h.at("crs").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("bad header field: ") + e.what());
    }
}

inline void write_r4b(const Raster4B& raster, const std::filesystem::path& path) {
    detail::write_file(path, encode_r4b(raster));
}

inline Raster4B read_r4b(const std::filesystem::path& path) { return decode_r4b(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Resampling

/// ceil(in_dim * in_size / target_size), tolerant to representation error in
/// the ratio so that e.g. 100 * 0.6 / 0.6 stays 100.
inline int resampled_dim(int in_dim, double in_size, double target_size) {
    const double exact = in_dim * in_size / target_size;
    return std::max(1, static_cast<int>(std::ceil(exact - 1e-9 * std::max(1.0, exact))));
}

/// Bilinear resampling in source pixel-centre space. Output pixel (c,r)
/// samples source coordinate (c+0.5)*target/src - 0.5, clamped to the grid.
/// A neighbour with non-zero weight that is nodata makes the output nodata.
/// Already at the target size, the raster is returned unchanged.
inline Raster4B resample(const Raster4B& src, double target_pixel_size) {
    if (!(target_pixel_size > 0.0)) fail(ErrorCode::InvalidArgument, "target pixel size must be > 0");
    const auto& g = src.geo();
    if (g.pixel_size_x == target_pixel_size && g.pixel_size_y == target_pixel_size) return src;
    const int ow = resampled_dim(src.width(), g.pixel_size_x, target_pixel_size);
    const int oh = resampled_dim(src.height(), g.pixel_size_y, target_pixel_size);
    GeoTransform og{g.origin_x, g.origin_y, target_pixel_size, target_pixel_size};
    Raster4B out(ow, oh, src.dtype(), og, src.nodata(), src.crs());

    struct Axis {
        int i0, i1;
        double f;
    };
    auto axis = [](int o, double in_size, double out_size, int n) {
        double u = (o + 0.5) * out_size / in_size - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(n - 1));
        const int i0 = static_cast<int>(std::floor(u));
        const int i1 = std::min(i0 + 1, n - 1);
        return Axis{i0, i1, u - i0};
    };
    std::vector<Axis> xs(ow), ys(oh);
    for (int c = 0; c < ow; ++c) xs[c] = axis(c, g.pixel_size_x, target_pixel_size, src.width());
    for (int r = 0; r < oh; ++r) ys[r] = axis(r, g.pixel_size_y, target_pixel_size, src.height());

    const double hi = max_value(src.dtype());
    for (int r = 0; r < oh; ++r) {
        const Axis ay = ys[r];
        for (int c = 0; c < ow; ++c) {
            const Axis ax = xs[c];
            const double w00 = (1 - ax.f) * (1 - ay.f), w01 = ax.f * (1 - ay.f);
            const double w10 = (1 - ax.f) * ay.f, w11 = ax.f * ay.f;
            bool nodata = false;
            if (src.nodata()) {
                nodata = (w00 > 0 && src.is_nodata(ay.i0, ax.i0)) || (w01 > 0 && src.is_nodata(ay.i0, ax.i1)) ||
                         (w10 > 0 && src.is_nodata(ay.i1, ax.i0)) || (w11 > 0 && src.is_nodata(ay.i1, ax.i1));
            }
            for (int b = 0; b < kBands; ++b) {
                if (nodata) {
                    out.at(b, r, c) = *src.nodata();
                    continue;
                }
                const double v = w00 * src.at(b, ay.i0, ax.i0) + w01 * src.at(b, ay.i0, ax.i1) +
                                 w10 * src.at(b, ay.i1, ax.i0) + w11 * src.at(b, ay.i1, ax.i1);
                out.at(b, r, c) = static_cast<std::uint16_t>(std::clamp(std::floor(v + 0.5), 0.0, hi));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// NDVI

/// Per-pixel NDVI; nodata pixels hold NaN.
struct NdviGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }

    /// Mean over valid pixels; NaN when no pixel is valid.
    double mean() const {
        double sum = 0.0;
        std::size_t n = 0;
        for (double v : values)
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
};

/// (NIR - R) / (NIR + R); a zero denominator yields 0.
inline double ndvi_value(double red, double nir) noexcept {
    const double den = nir + red;
    return den == 0.0 ? 0.0 : (nir - red) / den;
}

inline NdviGrid ndvi(const Raster4B& r) {
    NdviGrid g{r.width(), r.height(), std::vector<double>(r.band_stride())};
    for (int row = 0; row < r.height(); ++row)
        for (int col = 0; col < r.width(); ++col)
            g.values[static_cast<std::size_t>(row) * r.width() + col] =
                r.is_nodata(row, col) ? std::numeric_limits<double>::quiet_NaN()
                                      : ndvi_value(r.at(0, row, col), r.at(3, row, col));
    return g;
}

inline NdviGrid ndvi(const Tile& t, std::optional<std::uint16_t> nodata = std::nullopt) {
    NdviGrid g{kTileSize, kTileSize, std::vector<double>(kTilePixels)};
    for (int row = 0; row < kTileSize; ++row)
        for (int col = 0; col < kTileSize; ++col) {
            bool missing = false;
            if (nodata)
                for (int b = 0; b < kBands; ++b) missing = missing || t.at(b, row, col) == *nodata;
            g.values[row * kTileSize + col] = missing ? std::numeric_limits<double>::quiet_NaN()
                                                      : ndvi_value(t.at(0, row, col), t.at(3, row, col));
        }
    return g;
}

// ---------------------------------------------------------------------------
// Tiling

inline Tile extract_tile(const Raster4B& r, int origin_row, int origin_col) {
    Tile t;
    t.origin_col = origin_col;
    t.origin_row = origin_row;
    for (int b = 0; b < kBands; ++b)
        for (int row = 0; row < kTileSize; ++row) {
            const auto src = r.band(b).subspan(static_cast<std::size_t>(origin_row + row) * r.width() + origin_col,
                                               kTileSize);
            std::copy(src.begin(), src.end(), t.data.begin() + b * kTilePixels + row * kTileSize);
        }
    return t;
}

/// Non-overlapping 32x32 tiles over the top-left floor(w/32) x floor(h/32)
/// grid, row-major. Partial right/bottom remainders are dropped.
inline std::vector<Tile> dice(const Raster4B& r) {
    const int nx = r.width() / kTileSize;
    const int ny = r.height() / kTileSize;
    std::vector<Tile> tiles;
    tiles.reserve(static_cast<std::size_t>(nx) * ny);
    for (int ty = 0; ty < ny; ++ty)
        for (int tx = 0; tx < nx; ++tx) tiles.push_back(extract_tile(r, ty * kTileSize, tx * kTileSize));
    return tiles;
}

/// Edge-replicates the right/bottom borders up to the next multiple of m.
inline Raster4B pad_to_multiple(const Raster4B& r, int m) {
    if (m < 1) fail(ErrorCode::InvalidArgument, "pad multiple must be >= 1");
    const int w = (r.width() + m - 1) / m * m;
    const int h = (r.height() + m - 1) / m * m;
    if (w == r.width() && h == r.height()) return r;
    Raster4B out(w, h, r.dtype(), r.geo(), r.nodata(), r.crs());
    for (int b = 0; b < kBands; ++b)
        for (int row = 0; row < h; ++row) {
            const int sr = std::min(row, r.height() - 1);
            for (int col = 0; col < w; ++col) out.at(b, row, col) = r.at(b, sr, std::min(col, r.width() - 1));
        }
    return out;
}

} // namespace landcover
