#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/dataset.hpp"
#include "landcover/detail/binary_io.hpp"
#include "landcover/nn/model.hpp"

namespace landcover::nn {

struct Blob {
    std::string name;
    Shape shape;
    std::vector<float> data;

    friend bool operator==(const Blob&, const Blob&) = default;
};

/// Everything needed to rebuild a trained classifier: architecture,
/// parameters, BN running statistics and the input normalization.
struct Checkpoint {
    ModelConfig arch;
    std::vector<Blob> params;
    std::vector<Blob> bn_stats;
    bool bn_stats_initialized = false;
    BandStats band_stats{};
    std::optional<double> pixel_size;  // training resolution, CRS units per pixel
    int epoch = 0;
    std::uint64_t seed = 0;
    std::vector<Blob> momentum;  // optional optimizer state, parameter order

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline Checkpoint snapshot(Model<float>& model, const BandStats& stats, std::optional<double> pixel_size = {},
                           int epoch = 0, std::uint64_t seed = 0,
                           const std::vector<std::vector<float>>* momentum = nullptr) {
    Checkpoint ck;
    ck.arch = model.config();
    ck.band_stats = stats;
    ck.pixel_size = pixel_size;
    ck.epoch = epoch;
    ck.seed = seed;
    model.visit_params([&](const std::string& name, Param<float>& p) {
        ck.params.push_back({name, p.value.shape(), p.value.vec()});
    });
    bool initialized = true;
    model.visit_bn([&](const std::string& name, BatchNorm2d<float>& bn) {
        ck.bn_stats.push_back({name + ".running_mean", bn.running_mean().shape(), bn.running_mean().vec()});
        ck.bn_stats.push_back({name + ".running_var", bn.running_var().shape(), bn.running_var().vec()});
        initialized = initialized && bn.has_stats();
    });
    ck.bn_stats_initialized = initialized;
    if (momentum && !momentum->empty()) {
        for (std::size_t i = 0; i < ck.params.size(); ++i)
            ck.momentum.push_back({ck.params[i].name + ".momentum", ck.params[i].shape, (*momentum)[i]});
    }
    return ck;
}

/// Copies checkpoint state into a model built from the same descriptor.
inline void restore(Model<float>& model, const Checkpoint& ck) {
    if (!(model.config() == ck.arch)) fail(ErrorCode::ArchMismatch, "model and checkpoint descriptors differ");
    std::size_t i = 0;
    model.visit_params([&](const std::string& name, Param<float>& p) {
        if (i >= ck.params.size() || ck.params[i].name != name || ck.params[i].shape != p.value.shape())
            fail(ErrorCode::ArchMismatch, "parameter " + name + " missing or reshaped in checkpoint");
        p.value.vec() = ck.params[i++].data;
    });
    if (i != ck.params.size()) fail(ErrorCode::ArchMismatch, "checkpoint has extra parameters");
    i = 0;
    model.visit_bn([&](const std::string& name, BatchNorm2d<float>& bn) {
        if (i + 1 >= ck.bn_stats.size() || ck.bn_stats[i].name != name + ".running_mean")
            fail(ErrorCode::ArchMismatch, "batch norm statistics for " + name + " missing");
        bn.running_mean().vec() = ck.bn_stats[i++].data;
        bn.running_var().vec() = ck.bn_stats[i++].data;
        bn.set_has_stats(ck.bn_stats_initialized);
    });
}

inline Model<float> model_from_checkpoint(const Checkpoint& ck) {
    Model<float> m(ck.arch);
    restore(m, ck);
    return m;
}

// ---------------------------------------------------------------------------
// File format: "CNN1" | u32 LE descriptor length | JSON | f32 LE blobs

inline constexpr std::string_view kCheckpointMagic = "CNN1";

namespace detail {

inline nlohmann::json blob_table(const std::vector<Blob>& blobs) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& b : blobs) t.push_back({{"name", b.name}, {"shape", b.shape.dims()}});
    return t;
}

inline std::vector<BlobSpec> specs_of(const nlohmann::json& table) {
    std::vector<BlobSpec> out;
    for (const auto& e : table) {
        const auto d = e.at("shape").get<std::array<std::size_t, 4>>();
        out.push_back({e.at("name").get<std::string>(), Shape{d[0], d[1], d[2], d[3]}});
    }
    return out;
}

inline std::vector<BlobSpec> specs_of(const std::vector<Blob>& blobs) {
    std::vector<BlobSpec> out;
    for (const auto& b : blobs) out.push_back({b.name, b.shape});
    return out;
}

} // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
    nlohmann::json h;
    h["format"] = "landcover-checkpoint";
    h["version"] = 1;
    h["arch"] = to_json(ck.arch);
    h["params"] = detail::blob_table(ck.params);
    h["bn_stats"] = detail::blob_table(ck.bn_stats);
    h["momentum"] = detail::blob_table(ck.momentum);
    h["bn_stats_initialized"] = ck.bn_stats_initialized;
    h["band_stats"] = to_json(ck.band_stats);
    h["pixel_size"] = ck.pixel_size ? nlohmann::json(*ck.pixel_size) : nlohmann::json(nullptr);
    h["meta"] = {{"epoch", ck.epoch}, {"seed", ck.seed}};

    std::string payload;
    for (const auto* group : {&ck.params, &ck.bn_stats, &ck.momentum})
        for (const auto& b : *group) {
            if (b.data.size() != b.shape.numel()) fail(ErrorCode::ShapeMismatch, "blob " + b.name + " size mismatch");
            for (float v : b.data) landcover::detail::put_f32_le(payload, v);
        }
    return landcover::detail::encode_container(kCheckpointMagic, h, payload);
}

/// Rejects files whose declared blobs do not match the layout implied by
/// their own architecture descriptor.
inline Checkpoint decode_checkpoint(std::string_view bytes) {
    const auto c = landcover::detail::decode_container(bytes, kCheckpointMagic);
    const auto& h = c.header;
    Checkpoint ck;
    std::vector<BlobSpec> params, bn, mom;
    try {
        if (h.at("format").get<std::string>() != "landcover-checkpoint") fail(ErrorCode::BadMagic, "not a checkpoint");
        ck.arch = model_config_from_json(h.at("arch"));
        params = detail::specs_of(h.at("params"));
        bn = detail::specs_of(h.at("bn_stats"));
        mom = detail::specs_of(h.at("momentum"));
        ck.bn_stats_initialized = h.at("bn_stats_initialized").get<bool>();
        ck.band_stats = band_stats_from_json(h.at("band_stats"));
        if (!h.at("pixel_size").is_null()) ck.pixel_size = h.at("pixel_size").get<double>();
        ck.epoch = h.at("meta").at("epoch").get<int>();
        ck.seed = h.at("meta").at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::HeaderMismatch, std::string("checkpoint descriptor: ") + e.what());
    }
    try {
        ck.arch.validate();
    } catch (const Error& e) {
        fail(ErrorCode::ArchMismatch, e.what());
    }
    if (params != param_layout(ck.arch) || bn != bn_layout(ck.arch))
        fail(ErrorCode::ArchMismatch, "parameter blobs do not match the architecture descriptor");
    if (!mom.empty() && mom.size() != params.size())
        fail(ErrorCode::ArchMismatch, "momentum buffers do not match the parameter list");

    std::size_t total = 0;
    for (const auto* g : {&params, &bn, &mom})
        for (const auto& s : *g) total += s.shape.numel();
    if (c.payload.size() != total * 4)
        fail(ErrorCode::HeaderMismatch, "checkpoint payload is " + std::to_string(c.payload.size()) +
                                            " bytes, descriptor declares " + std::to_string(total * 4));
    std::size_t off = 0;
    auto take = [&](const std::vector<BlobSpec>& specs, std::vector<Blob>& out) {
        for (const auto& s : specs) {
            Blob b{s.name, s.shape, std::vector<float>(s.shape.numel())};
            for (auto& v : b.data) {
                v = landcover::detail::get_f32_le(c.payload.data() + off);
                off += 4;
            }
            out.push_back(std::move(b));
        }
    };
    take(params, ck.params);
    take(bn, ck.bn_stats);
    take(mom, ck.momentum);
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    landcover::detail::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(landcover::detail::read_file(path));
}

/// Loads and checks the descriptor against an expected architecture.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    auto ck = load_checkpoint(path);
    if (!(ck.arch == expected)) fail(ErrorCode::ArchMismatch, "checkpoint architecture differs from the expected one");
    return ck;
}

} // namespace landcover::nn
