#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/nn/layers.hpp"
#include "landcover/rng.hpp"

namespace landcover::nn {

enum class Stem {
    Cifar,     // 3x3 stride 1, no max-pool
    ImageNet,  // 7x7 stride 2 + 3x3/2 max-pool
};

inline std::string to_string(Stem s) { return s == Stem::Cifar ? "cifar" : "imagenet"; }

inline Stem stem_from_string(const std::string& s) {
    if (s == "cifar") return Stem::Cifar;
    if (s == "imagenet") return Stem::ImageNet;
    fail(ErrorCode::Config, "unknown stem '" + s + "'");
}

/// Residual classifier architecture: a stem, four stages of basic blocks,
/// global average pooling and a linear head.
struct ModelConfig {
    Stem stem = Stem::Cifar;
    std::array<int, 4> stage_blocks{3, 4, 6, 3};
    std::array<int, 4> stage_widths{64, 128, 256, 512};
    int in_channels = 4;
    int n_classes = 5;

    static ModelConfig preset(const std::string& name) {
        ModelConfig c;
        if (name == "r34") {
            c.stage_blocks = {3, 4, 6, 3};
        } else if (name == "compact") {
            c.stage_blocks = {1, 1, 1, 1};
        } else {
            fail(ErrorCode::Config, "unknown model preset '" + name + "'");
        }
        return c;
    }

    void validate() const {
        for (int b : stage_blocks)
            if (b < 1) fail(ErrorCode::Config, "every stage needs at least one block");
        for (int w : stage_widths)
            if (w < 1) fail(ErrorCode::Config, "stage widths must be positive");
        if (in_channels != 4) fail(ErrorCode::Config, "in_channels must be 4");
        if (n_classes < 2) fail(ErrorCode::Config, "n_classes must be >= 2");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"stem", to_string(c.stem)},
            {"stage_blocks", c.stage_blocks},
            {"stage_widths", c.stage_widths},
            {"in_channels", c.in_channels},
            {"n_classes", c.n_classes}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.stem = stem_from_string(j.at("stem").get<std::string>());
        c.stage_blocks = j.at("stage_blocks").get<std::array<int, 4>>();
        c.stage_widths = j.at("stage_widths").get<std::array<int, 4>>();
        c.in_channels = j.at("in_channels").get<int>();
        c.n_classes = j.at("n_classes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ArchMismatch, std::string("bad architecture descriptor: ") + e.what());
    }
    return c;
}

struct BlobSpec {
    std::string name;
    Shape shape;

    friend bool operator==(const BlobSpec&, const BlobSpec&) = default;
};

/// Parameter names and shapes in model order, derived from the descriptor
/// alone. Mirrors the construction in Model and BasicBlock.
inline std::vector<BlobSpec> param_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<BlobSpec> out;
    auto conv = [&](const std::string& name, std::size_t ci, std::size_t co, std::size_t k) {
        out.push_back({name, Shape{co, ci, k, k}});
    };
    auto bn = [&](const std::string& name, std::size_t c) {
        out.push_back({name + ".weight", Shape{c}});
        out.push_back({name + ".bias", Shape{c}});
    };
    const auto w0 = static_cast<std::size_t>(cfg.stage_widths[0]);
    conv("stem.conv.weight", cfg.in_channels, w0, cfg.stem == Stem::Cifar ? 3 : 7);
    bn("stem.bn", w0);
    std::size_t in = w0;
    for (int s = 0; s < 4; ++s) {
        const auto width = static_cast<std::size_t>(cfg.stage_widths[s]);
        for (int b = 0; b < cfg.stage_blocks[s]; ++b) {
            const std::string p = "stage" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
            const bool down = (s > 0 && b == 0) || in != width;
            conv(p + "conv1.weight", in, width, 3);
            bn(p + "bn1", width);
            conv(p + "conv2.weight", width, width, 3);
            bn(p + "bn2", width);
            if (down) {
                conv(p + "downsample.conv.weight", in, width, 1);
                bn(p + "downsample.bn", width);
            }
            in = width;
        }
    }
    out.push_back({"fc.weight", Shape{static_cast<std::size_t>(cfg.n_classes), in}});
    out.push_back({"fc.bias", Shape{static_cast<std::size_t>(cfg.n_classes)}});
    return out;
}

/// Running-statistic buffers ("<bn>.running_mean", "<bn>.running_var") in model order.
inline std::vector<BlobSpec> bn_layout(const ModelConfig& cfg) {
    std::vector<BlobSpec> out;
    for (const auto& p : param_layout(cfg)) {
        if (p.name.find(".bn") == std::string::npos || !p.name.ends_with(".weight")) continue;
        const std::string base = p.name.substr(0, p.name.size() - std::string(".weight").size());
        out.push_back({base + ".running_mean", p.shape});
        out.push_back({base + ".running_var", p.shape});
    }
    return out;
}

/// conv3x3-BN-ReLU-conv3x3-BN plus skip, then ReLU. The skip is a 1x1
/// projection (conv + BN) when the stride or width changes.
template <class T>
class BasicBlock {
public:
    BasicBlock(std::size_t in, std::size_t out, std::size_t stride)
        : conv1_(in, out, 3, stride, 1), bn1_(out), conv2_(out, out, 3, 1, 1), bn2_(out) {
        if (stride != 1 || in != out) {
            proj_conv_.emplace(in, out, 1, stride, 0);
            proj_bn_.emplace(out);
        }
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        Tensor<T> h = relu1_.forward(bn1_.forward(conv1_.forward(x, mode), mode), mode);
        h = bn2_.forward(conv2_.forward(h, mode), mode);
        const Tensor<T> skip = proj_conv_ ? proj_bn_->forward(proj_conv_->forward(x, mode), mode) : x;
        return relu_out_.forward(add(h, skip), mode);
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T> d = relu_out_.backward(dy);
        Tensor<T> dh = conv2_.backward(bn2_.backward(d));
        dh = conv1_.backward(bn1_.backward(relu1_.backward(dh)));
        const Tensor<T> ds = proj_conv_ ? proj_conv_->backward(proj_bn_->backward(d)) : d;
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += ds[i];
        return dh;
    }

    template <class Fn>
    void visit_params(const std::string& prefix, Fn&& fn) {
        fn(prefix + "conv1.weight", conv1_.weight());
        fn(prefix + "bn1.weight", bn1_.gamma());
        fn(prefix + "bn1.bias", bn1_.beta());
        fn(prefix + "conv2.weight", conv2_.weight());
        fn(prefix + "bn2.weight", bn2_.gamma());
        fn(prefix + "bn2.bias", bn2_.beta());
        if (proj_conv_) {
            fn(prefix + "downsample.conv.weight", proj_conv_->weight());
            fn(prefix + "downsample.bn.weight", proj_bn_->gamma());
            fn(prefix + "downsample.bn.bias", proj_bn_->beta());
        }
    }

    template <class Fn>
    void visit_bn(const std::string& prefix, Fn&& fn) {
        fn(prefix + "bn1", bn1_);
        fn(prefix + "bn2", bn2_);
        if (proj_bn_) fn(prefix + "downsample.bn", *proj_bn_);
    }

    void release_cache() {
        conv1_.release_cache();
        bn1_.release_cache();
        relu1_.release_cache();
        conv2_.release_cache();
        bn2_.release_cache();
        relu_out_.release_cache();
        if (proj_conv_) {
            proj_conv_->release_cache();
            proj_bn_->release_cache();
        }
    }

private:
    Conv2d<T> conv1_;
    BatchNorm2d<T> bn1_;
    ReLU<T> relu1_;
    Conv2d<T> conv2_;
    BatchNorm2d<T> bn2_;
    std::optional<Conv2d<T>> proj_conv_;
    std::optional<BatchNorm2d<T>> proj_bn_;
    ReLU<T> relu_out_;
};

template <class T>
class Model {
public:
    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto w0 = static_cast<std::size_t>(cfg.stage_widths[0]);
        if (cfg.stem == Stem::Cifar)
            stem_conv_ = Conv2d<T>(cfg.in_channels, w0, 3, 1, 1);
        else
            stem_conv_ = Conv2d<T>(cfg.in_channels, w0, 7, 2, 3);
        stem_conv_.set_input_grad(false);
        stem_bn_ = BatchNorm2d<T>(w0);
        std::size_t in = w0;
        for (int s = 0; s < 4; ++s) {
            const auto out = static_cast<std::size_t>(cfg.stage_widths[s]);
            for (int b = 0; b < cfg.stage_blocks[s]; ++b) {
                const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
                blocks_.emplace_back(in, out, stride);
                block_names_.push_back("stage" + std::to_string(s + 1) + "." + std::to_string(b) + ".");
                in = out;
            }
        }
        fc_ = Linear<T>(in, static_cast<std::size_t>(cfg.n_classes));
    }

    const ModelConfig& config() const noexcept { return cfg_; }

    /// He-normal (fan-out) convolutions, BN gamma=1 beta=0, linear head
    /// uniform in +-1/sqrt(fan_in). Draws follow parameter order.
    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        visit_params([&](const std::string& name, Param<T>& p) {
            auto& v = p.value;
            const bool is_conv = name.find("conv") != std::string::npos;
            if (name.rfind("fc.", 0) == 0) {
                const double bound = 1.0 / std::sqrt(static_cast<double>(fc_.in_features()));
                for (auto& x : v.vec()) x = static_cast<T>(rng.uniform(-bound, bound));
            } else if (is_conv) {
                const double std = std::sqrt(2.0 / static_cast<double>(v.n() * v.h() * v.w()));
                for (auto& x : v.vec()) x = static_cast<T>(rng.normal() * std);
            } else if (name.ends_with(".weight")) {
                v.fill(T(1));
            } else {
                v.fill(T(0));
            }
        });
        visit_bn([](const std::string&, BatchNorm2d<T>& bn) {
            bn.running_mean().fill(T(0));
            bn.running_var().fill(T(1));
            bn.set_has_stats(false);
        });
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        if (x.c() != static_cast<std::size_t>(cfg_.in_channels))
            fail(ErrorCode::ShapeMismatch, "model input must have 4 channels, got " + std::to_string(x.c()));
        Tensor<T> h = stem_relu_.forward(stem_bn_.forward(stem_conv_.forward(x, mode), mode), mode);
        if (cfg_.stem == Stem::ImageNet) h = stem_pool_.forward(h, mode);
        for (auto& b : blocks_) h = b.forward(h, mode);
        h = gap_.forward(h, mode);
        Tensor<T> logits = fc_.forward(h, mode);
        ensure_finite(logits, "model logits");
        return logits;
    }

    /// Accumulates parameter gradients from d(loss)/d(logits).
    void backward(const Tensor<T>& dlogits) {
        Tensor<T> d = gap_.backward(fc_.backward(dlogits));
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
        if (cfg_.stem == Stem::ImageNet) d = stem_pool_.backward(d);
        stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(d)));
    }

    void zero_grad() {
        visit_params([](const std::string&, Param<T>& p) { p.grad.zero(); });
    }

    void release_cache() {
        stem_conv_.release_cache();
        stem_bn_.release_cache();
        stem_relu_.release_cache();
        stem_pool_.release_cache();
        for (auto& b : blocks_) b.release_cache();
        fc_.release_cache();
    }

    template <class Fn>
    void visit_params(Fn&& fn) {
        fn(std::string("stem.conv.weight"), stem_conv_.weight());
        fn(std::string("stem.bn.weight"), stem_bn_.gamma());
        fn(std::string("stem.bn.bias"), stem_bn_.beta());
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit_params(block_names_[i], fn);
        fn(std::string("fc.weight"), fc_.weight());
        fn(std::string("fc.bias"), fc_.bias());
    }

    template <class Fn>
    void visit_bn(Fn&& fn) {
        fn(std::string("stem.bn"), stem_bn_);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit_bn(block_names_[i], fn);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        visit_params([&](const std::string&, Param<T>& p) { n += p.value.size(); });
        return n;
    }

private:
    ModelConfig cfg_;
    Conv2d<T> stem_conv_;
    BatchNorm2d<T> stem_bn_;
    ReLU<T> stem_relu_;
    MaxPool2d<T> stem_pool_{3, 2, 1};
    std::vector<BasicBlock<T>> blocks_;
    std::vector<std::string> block_names_;
    GlobalAvgPool<T> gap_;
    Linear<T> fc_;
};

} // namespace landcover::nn
