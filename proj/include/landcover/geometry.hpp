#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/detail/binary_io.hpp"
#include "landcover/error.hpp"

namespace landcover {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Ring = std::vector<Point>;

/// Outer ring first, holes after. Rings are closed (first == last).
struct Polygon {
    std::vector<Ring> rings;

    void validate() const {
        if (rings.empty()) fail(ErrorCode::InvalidArgument, "polygon without rings");
        for (const auto& ring : rings) {
            if (ring.size() < 4) fail(ErrorCode::InvalidArgument, "polygon ring needs at least 4 points");
            if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
                fail(ErrorCode::InvalidArgument, "polygon ring is not closed");
        }
    }
};

/// Even-odd (crossing number) test over all rings, so holes are excluded.
/// Points exactly on an edge may fall either way.
inline bool contains(const Polygon& poly, Point p) noexcept {
    bool inside = false;
    for (const auto& ring : poly.rings) {
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            const Point a = ring[i], b = ring[j];
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x_cross) inside = !inside;
            }
        }
    }
    return inside;
}

inline bool contains_any(const std::vector<Polygon>& polys, Point p) noexcept {
    for (const auto& poly : polys)
        if (contains(poly, p)) return true;
    return false;
}

namespace detail {

inline Polygon polygon_from_geojson(const nlohmann::json& geometry) {
    if (geometry.value("type", "") != "Polygon")
        fail(ErrorCode::InvalidArgument, "only Polygon geometries are supported");
    Polygon poly;
    for (const auto& ring_json : geometry.at("coordinates")) {
        Ring ring;
        for (const auto& pt : ring_json) ring.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        poly.rings.push_back(std::move(ring));
    }
    poly.validate();
    return poly;
}

} // namespace detail

/// A GeoJSON FeatureCollection of Polygon features, geometry and properties.
struct GeoFeature {
    Polygon polygon;
    nlohmann::json properties;
};

inline std::vector<GeoFeature> parse_feature_collection(const std::string& text) {
    std::vector<GeoFeature> out;
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.value("type", "") != "FeatureCollection")
            fail(ErrorCode::InvalidArgument, "GeoJSON root must be a FeatureCollection");
        for (const auto& f : doc.at("features")) {
            GeoFeature gf;
            gf.polygon = detail::polygon_from_geojson(f.at("geometry"));
            gf.properties = f.contains("properties") && !f["properties"].is_null() ? f["properties"]
                                                                                   : nlohmann::json::object();
            out.push_back(std::move(gf));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("malformed GeoJSON: ") + e.what());
    }
    return out;
}

inline std::vector<Polygon> read_polygons(const std::filesystem::path& path) {
    std::vector<Polygon> polys;
    for (auto& f : parse_feature_collection(detail::read_file(path))) polys.push_back(std::move(f.polygon));
    return polys;
}

inline nlohmann::json polygon_to_geojson(const Polygon& poly) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& ring : poly.rings) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& p : ring) r.push_back({p.x, p.y});
        coords.push_back(std::move(r));
    }
    return {{"type", "Polygon"}, {"coordinates", std::move(coords)}};
}

/// Axis-aligned rectangle as a closed counter-clockwise ring.
inline Polygon rectangle(double x0, double y0, double x1, double y1) {
    return Polygon{{Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}}};
}

} // namespace landcover
