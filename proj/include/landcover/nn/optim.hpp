#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "landcover/nn/model.hpp"

namespace landcover::nn {

struct TrainConfig {
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int epochs = 300;
    int lr_drop_every = 100;
    double lr_drop_factor = 10.0;
    int batch_size = 512;
    double label_smoothing = 0.1;
    std::uint64_t seed = 0;
    bool augment = true;

    void validate() const {
        if (!(lr0 > 0)) fail(ErrorCode::Config, "lr0 must be > 0");
        if (!(momentum >= 0 && momentum < 1)) fail(ErrorCode::Config, "momentum must be in [0,1)");
        if (!(weight_decay >= 0)) fail(ErrorCode::Config, "weight_decay must be >= 0");
        if (epochs < 0) fail(ErrorCode::Config, "epochs must be >= 0");
        if (lr_drop_every < 1) fail(ErrorCode::Config, "lr_drop_every must be >= 1");
        if (!(lr_drop_factor > 0)) fail(ErrorCode::Config, "lr_drop_factor must be > 0");
        if (batch_size < 1) fail(ErrorCode::Config, "batch_size must be >= 1");
        if (!(label_smoothing >= 0 && label_smoothing <= 1)) fail(ErrorCode::Config, "label_smoothing outside [0,1]");
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr0", c.lr0},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"lr_drop_every", c.lr_drop_every},
            {"lr_drop_factor", c.lr_drop_factor},
            {"batch_size", c.batch_size},
            {"label_smoothing", c.label_smoothing},
            {"seed", c.seed},
            {"augment", c.augment}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorCode::Config, "train must be an object");
    static const std::vector<std::string> keys = {"lr0",           "momentum",       "weight_decay", "epochs",
                                                  "lr_drop_every", "lr_drop_factor", "batch_size",   "label_smoothing",
                                                  "seed",          "augment"};
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            fail(ErrorCode::Config, "unknown key '" + key + "' in train");
    TrainConfig c;
    try {
        c.lr0 = j.value("lr0", c.lr0);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.epochs = j.value("epochs", c.epochs);
        c.lr_drop_every = j.value("lr_drop_every", c.lr_drop_every);
        c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
        c.seed = j.value("seed", c.seed);
        c.augment = j.value("augment", c.augment);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("train: ") + e.what());
    }
    c.validate();
    return c;
}

/// Step schedule: lr0 / factor^floor(epoch / drop_every).
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) fail(ErrorCode::InvalidArgument, "negative epoch");
    const int drops = epoch / cfg.lr_drop_every;
    double divisor = 1.0;
    for (int i = 0; i < drops; ++i) divisor *= cfg.lr_drop_factor;
    return cfg.lr0 / divisor;
}

/// One SGD update with coupled weight decay:
///   g' = g + wd*w;  buf = mu*buf + g';  w = w - lr*buf.
template <class T>
void sgd_step(std::span<T> w, std::span<const T> g, std::span<T> buf, T lr, T mu, T wd) {
    if (w.size() != g.size() || w.size() != buf.size()) fail(ErrorCode::ShapeMismatch, "sgd_step size mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
        const T gd = g[i] + wd * w[i];
        buf[i] = mu * buf[i] + gd;
        w[i] = w[i] - lr * buf[i];
    }
}

/// Momentum buffers for every model parameter, in parameter order.
template <class T>
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(Model<T>& model, double lr) {
        std::size_t i = 0;
        model.visit_params([&](const std::string& name, Param<T>& p) {
            if (i == buffers_.size()) buffers_.emplace_back(p.value.size(), T(0));
            auto& buf = buffers_[i++];
            sgd_step<T>(p.value.span(), p.grad.span(), buf, static_cast<T>(lr), static_cast<T>(momentum_),
                        static_cast<T>(weight_decay_));
            if (!all_finite(std::as_const(p.value).span())) fail(ErrorCode::DivergedLoss, "non-finite parameter " + name + " after step");
        });
    }

    const std::vector<std::vector<T>>& buffers() const noexcept { return buffers_; }
    std::vector<std::vector<T>>& buffers() noexcept { return buffers_; }

private:
    double momentum_;
    double weight_decay_;
    std::vector<std::vector<T>> buffers_;
};

} // namespace landcover::nn
