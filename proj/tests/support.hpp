#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "landcover/error.hpp"
#include "landcover/raster.hpp"
#include "landcover/rng.hpp"

namespace testing_support {

/// Runs `fn` and asserts it throws landcover::Error with `code`.
inline ::testing::AssertionResult throws_code(const std::function<void()>& fn, landcover::ErrorCode code) {
    try {
        fn();
    } catch (const landcover::Error& e) {
        if (e.code() == code) return ::testing::AssertionSuccess();
        return ::testing::AssertionFailure() << "threw " << landcover::to_string(e.code()) << " (" << e.what()
                                             << "), expected " << landcover::to_string(code);
    }
    return ::testing::AssertionFailure() << "did not throw, expected " << landcover::to_string(code);
}

#define EXPECT_CODE(stmt, code) EXPECT_TRUE(::testing_support::throws_code([&] { stmt; }, ::landcover::ErrorCode::code))

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "landcover_";
        if (info) name += std::string(info->test_suite_name()) + "_" + info->name();
        for (auto& ch : name)
            if (ch == '/') ch = '_';
        path_ = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline landcover::Raster4B random_raster(landcover::Rng& rng, int w, int h, landcover::SampleType dtype,
                                         landcover::GeoTransform geo = {}) {
    landcover::Raster4B r(w, h, dtype, geo);
    const auto hi = landcover::max_value(dtype);
    for (auto& v : r.samples()) v = static_cast<std::uint16_t>(rng.uniform_below(hi + 1u));
    return r;
}

inline landcover::Tile random_tile(landcover::Rng& rng, std::uint16_t hi = 255) {
    landcover::Tile t;
    for (auto& v : t.data) v = static_cast<std::uint16_t>(rng.uniform_below(hi + 1u));
    return t;
}

} // namespace testing_support
