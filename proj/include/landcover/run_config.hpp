#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/dataset.hpp"
#include "landcover/detail/binary_io.hpp"
#include "landcover/nn/model.hpp"
#include "landcover/nn/optim.hpp"

// Single JSON run configuration shared by the command-line subcommands:
//   {curation, split, model, train, io}
// Relative paths in "io" resolve against the config file's directory.

namespace landcover {

struct SplitSettings {
    std::uint64_t seed = 0;
    std::size_t n_val = 5000;
    std::size_t n_test = 5000;
};

struct RasterInput {
    std::string id;
    std::filesystem::path path;
};

struct IoPaths {
    std::vector<RasterInput> rasters;
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> manifest;
    std::string tile_file = "tiles.bin";
    std::optional<std::filesystem::path> split_manifest;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> best_checkpoint;
    std::optional<std::filesystem::path> metrics;

    /// Manifest that training and evaluation read: the split one if declared.
    std::optional<std::filesystem::path> training_manifest() const { return split_manifest ? split_manifest : manifest; }
};

struct RunConfig {
    CurationConfig curation;
    SplitSettings split;
    std::string model_preset = "compact";
    nn::ModelConfig model = nn::ModelConfig::preset("compact");
    nn::TrainConfig train;
    IoPaths io;
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

inline nn::ModelConfig model_from_section(const nlohmann::json& j, std::string& preset) {
    reject_unknown_keys(j, {"preset", "stem", "stage_blocks", "stage_widths"}, "model");
    try {
        preset = j.value("preset", std::string("compact"));
        auto c = nn::ModelConfig::preset(preset);
        if (j.contains("stem")) c.stem = nn::stem_from_string(j["stem"].get<std::string>());
        if (j.contains("stage_blocks")) c.stage_blocks = j["stage_blocks"].get<std::array<int, 4>>();
        if (j.contains("stage_widths")) c.stage_widths = j["stage_widths"].get<std::array<int, 4>>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("model: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorCode::Config, std::string("model: ") + e.what());
    }
}

inline IoPaths io_from_section(const nlohmann::json& j, const std::filesystem::path& base) {
    reject_unknown_keys(j, {"rasters", "labels", "manifest", "tile_file", "split_manifest", "checkpoint",
                            "best_checkpoint", "metrics"},
                        "io");
    IoPaths io;
    try {
        if (j.contains("rasters"))
            for (const auto& r : j["rasters"]) {
                reject_unknown_keys(r, {"id", "path"}, "io.rasters[]");
                io.rasters.push_back({r.at("id").get<std::string>(), resolve(base, r.at("path").get<std::string>())});
            }
        auto opt = [&](const char* key, std::optional<std::filesystem::path>& out) {
            if (j.contains(key)) out = resolve(base, j[key].get<std::string>());
        };
        opt("labels", io.labels);
        opt("manifest", io.manifest);
        opt("split_manifest", io.split_manifest);
        opt("checkpoint", io.checkpoint);
        opt("best_checkpoint", io.best_checkpoint);
        opt("metrics", io.metrics);
        io.tile_file = j.value("tile_file", io.tile_file);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("io: ") + e.what());
    }
    if (io.tile_file.empty() || std::filesystem::path(io.tile_file).has_parent_path())
        fail(ErrorCode::Config, "io.tile_file must be a bare file name");
    return io;
}

} // namespace detail

/// Parses a run configuration. `base` is the directory relative paths are
/// resolved against.
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
    detail::reject_unknown_keys(j, {"curation", "split", "model", "train", "io"}, "run config");
    RunConfig rc;
    if (j.contains("curation")) rc.curation = curation_config_from_json(j["curation"]);
    if (j.contains("split")) {
        const auto& s = j["split"];
        detail::reject_unknown_keys(s, {"seed", "n_val", "n_test"}, "split");
        try {
            rc.split.seed = s.value("seed", rc.split.seed);
            rc.split.n_val = s.value("n_val", rc.split.n_val);
            rc.split.n_test = s.value("n_test", rc.split.n_test);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::Config, std::string("split: ") + e.what());
        }
    }
    if (j.contains("model")) rc.model = detail::model_from_section(j["model"], rc.model_preset);
    if (j.contains("train")) rc.train = nn::train_config_from_json(j["train"]);
    if (j.contains("io")) rc.io = detail::io_from_section(j["io"], base);
    return rc;
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::Config, "override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) fail(ErrorCode::Config, "override key '" + key + "' has an empty component");
        if (!node->is_object()) {
            if (!node->is_null()) fail(ErrorCode::Config, "override '" + key + "' descends into a non-object");
            *node = nlohmann::json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::Config, "config file " + path.string() + " does not exist");
    auto j = nlohmann::json::parse(detail::read_file(path), nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::Config, path.string() + " is not valid JSON");
    return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    auto j = read_json_file(path);
    for (const auto& o : overrides) apply_override(j, o);
    return run_config_from_json(j, path.parent_path());
}

/// Fails with a Config error unless every listed input exists and every
/// output's directory can be created.
inline void validate_paths(const std::vector<std::filesystem::path>& inputs,
                           const std::vector<std::filesystem::path>& outputs) {
    for (const auto& p : inputs)
        if (!std::filesystem::is_regular_file(p)) fail(ErrorCode::Config, "input " + p.string() + " does not exist");
    for (const auto& p : outputs) {
        const auto dir = p.parent_path();
        if (dir.empty()) continue;
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec || !std::filesystem::is_directory(dir))
            fail(ErrorCode::Config, "cannot create output directory " + dir.string());
    }
}

} // namespace landcover
