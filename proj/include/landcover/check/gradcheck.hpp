#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "landcover/check/conv_oracle.hpp"
#include "landcover/nn/layers.hpp"
#include "landcover/nn/loss.hpp"
#include "landcover/nn/model.hpp"
#include "landcover/rng.hpp"

// Finite-difference gradient checks in double precision. Each layer is
// wrapped as L = sum(f(x) * r) for a random cotangent r; the analytic
// gradient comes from backward(r).

namespace landcover::check {

using nn::Shape;
using TensorD = nn::Tensor<double>;

inline constexpr double kStep = 1e-5;

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double den = std::sqrt(std::max(na, nb));
    return den == 0.0 ? 0.0 : std::sqrt(diff) / den;
}

inline double dot(const TensorD& y, const TensorD& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
}

/// Central differences of L(x) = <f(), r> with respect to every entry of x.
/// When `kinked` is given, entries whose one-sided slopes disagree (the step
/// straddles a ReLU or max-pool switch) are flagged there.
template <class Forward>
std::vector<double> numeric_gradient(Forward&& f, std::span<double> x, const TensorD& r, double h = kStep,
                                     std::vector<bool>* kinked = nullptr) {
    std::vector<double> g(x.size());
    const double mid = kinked ? dot(f(), r) : 0.0;
    if (kinked) kinked->assign(x.size(), false);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = dot(f(), r);
        x[i] = keep - h;
        const double down = dot(f(), r);
        x[i] = keep;
        g[i] = (up - down) / (2 * h);
        if (kinked) {
            const double right = (up - mid) / h, left = (mid - down) / h;
            (*kinked)[i] = std::abs(right - left) > 1e-2 * std::max(1.0, std::abs(g[i]));
        }
    }
    return g;
}

inline TensorD random_tensor(Shape s, Rng& rng, double scale = 1.0) {
    TensorD t(s);
    for (auto& v : t.vec()) v = scale * rng.normal();
    return t;
}

inline int pick(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.uniform_below(hi - lo + 1)); }

struct GradCheck {
    std::string layer;
    int instances = 0;
    double worst = 0.0;

    void record(double err) {
        worst = std::max(worst, err);
    }
};

// ---------------------------------------------------------------------------

inline double check_conv_once(Rng& rng) {
    const int k = std::array{1, 3, 5, 7}[rng.uniform_below(4)];
    const int stride = pick(rng, 1, 2), pad = pick(rng, 0, k / 2);
    const int n = pick(rng, 1, 3), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
    const int h = pick(rng, std::max(1, k - 2 * pad), 7), w = pick(rng, std::max(1, k - 2 * pad), 7);
    nn::Conv2d<double> conv(ci, co, k, stride, pad);
    conv.weight().value = random_tensor(conv.weight().value.shape(), rng);
    TensorD x = random_tensor(Shape{std::size_t(n), std::size_t(ci), std::size_t(h), std::size_t(w)}, rng);
    const TensorD y = conv.forward(x);
    const TensorD r = random_tensor(y.shape(), rng);
    conv.weight().grad.zero();
    const TensorD dx = conv.backward(r);
    const std::vector<double> dw = conv.weight().grad.vec();
    auto f = [&] { return conv.forward(x); };
    const auto ndx = numeric_gradient(f, x.span(), r);
    const auto ndw = numeric_gradient(f, conv.weight().value.span(), r);
    return std::max(relative_error(dx.span(), ndx), relative_error(dw, ndw));
}

inline double check_batchnorm_once(Rng& rng) {
    // At least 8 values per channel: with only two, the normalized output is
    // nearly constant and the input gradient drowns in rounding noise.
    const int n = pick(rng, 2, 4), c = pick(rng, 1, 3), h = pick(rng, 2, 4), w = pick(rng, 2, 4);
    nn::BatchNorm2d<double> bn(c);
    bn.gamma().value = random_tensor(Shape{std::size_t(c)}, rng);
    bn.beta().value = random_tensor(Shape{std::size_t(c)}, rng);
    TensorD x = random_tensor(Shape{std::size_t(n), std::size_t(c), std::size_t(h), std::size_t(w)}, rng, 2.0);
    const TensorD y = bn.forward(x, nn::Mode::Train);
    const TensorD r = random_tensor(y.shape(), rng);
    bn.gamma().grad.zero();
    bn.beta().grad.zero();
    const TensorD dx = bn.backward(r);
    auto f = [&] { return bn.forward(x, nn::Mode::Train); };
    double err = relative_error(dx.span(), numeric_gradient(f, x.span(), r));
    err = std::max(err, relative_error(bn.gamma().grad.span(), numeric_gradient(f, bn.gamma().value.span(), r)));
    err = std::max(err, relative_error(bn.beta().grad.span(), numeric_gradient(f, bn.beta().value.span(), r)));
    return err;
}

inline double check_relu_once(Rng& rng) {
    const Shape s{std::size_t(pick(rng, 1, 3)), std::size_t(pick(rng, 1, 3)), std::size_t(pick(rng, 1, 5)),
                  std::size_t(pick(rng, 1, 5))};
    TensorD x = random_tensor(s, rng);
    for (auto& v : x.vec())
        if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;  // stay clear of the kink
    nn::ReLU<double> relu;
    const TensorD y = relu.forward(x);
    const TensorD r = random_tensor(y.shape(), rng);
    const TensorD dx = relu.backward(r);
    return relative_error(dx.span(), numeric_gradient([&] { return relu.forward(x); }, x.span(), r));
}

inline double check_maxpool_once(Rng& rng) {
    const int k = pick(rng, 2, 3), stride = pick(rng, 1, 2), pad = pick(rng, 0, k / 2);
    const Shape s{std::size_t(pick(rng, 1, 2)), std::size_t(pick(rng, 1, 3)), std::size_t(pick(rng, k, 6)),
                  std::size_t(pick(rng, k, 6))};
    // Distinct values spaced well beyond the step keep every window's argmax stable.
    TensorD x(s);
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < x.size(); ++i) x[order[i]] = 0.01 * static_cast<double>(i) - 1.0;
    nn::MaxPool2d<double> pool(k, stride, pad);
    const TensorD y = pool.forward(x);
    const TensorD r = random_tensor(y.shape(), rng);
    const TensorD dx = pool.backward(r);
    return relative_error(dx.span(), numeric_gradient([&] { return pool.forward(x); }, x.span(), r));
}

inline double check_avgpool_once(Rng& rng) {
    const Shape s{std::size_t(pick(rng, 1, 3)), std::size_t(pick(rng, 1, 4)), std::size_t(pick(rng, 1, 5)),
                  std::size_t(pick(rng, 1, 5))};
    TensorD x = random_tensor(s, rng);
    nn::GlobalAvgPool<double> gap;
    const TensorD y = gap.forward(x);
    const TensorD r = random_tensor(y.shape(), rng);
    const TensorD dx = gap.backward(r);
    return relative_error(dx.span(), numeric_gradient([&] { return gap.forward(x); }, x.span(), r));
}

inline double check_linear_once(Rng& rng) {
    const int n = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
    nn::Linear<double> fc(in, out);
    fc.weight().value = random_tensor(fc.weight().value.shape(), rng);
    fc.bias().value = random_tensor(fc.bias().value.shape(), rng);
    TensorD x = random_tensor(Shape{std::size_t(n), std::size_t(in), 1, 1}, rng);
    const TensorD y = fc.forward(x);
    const TensorD r = random_tensor(y.shape(), rng);
    fc.weight().grad.zero();
    fc.bias().grad.zero();
    const TensorD dx = fc.backward(r);
    auto f = [&] { return fc.forward(x); };
    double err = relative_error(dx.span(), numeric_gradient(f, x.span(), r));
    err = std::max(err, relative_error(fc.weight().grad.span(), numeric_gradient(f, fc.weight().value.span(), r)));
    err = std::max(err, relative_error(fc.bias().grad.span(), numeric_gradient(f, fc.bias().value.span(), r)));
    return err;
}

inline double check_block_once(Rng& rng) {
    const int in = pick(rng, 1, 3), out = pick(rng, 1, 4), stride = pick(rng, 1, 2);
    nn::BasicBlock<double> block(in, out, stride);
    std::vector<nn::Param<double>*> params;
    block.visit_params("", [&](const std::string&, nn::Param<double>& p) {
        p.value = random_tensor(p.value.shape(), rng, 0.5);
        p.grad.zero();
        params.push_back(&p);
    });
    TensorD x = random_tensor(Shape{std::size_t(pick(rng, 2, 3)), std::size_t(in), std::size_t(pick(rng, 4, 6)),
                                    std::size_t(pick(rng, 4, 6))},
                              rng);
    const TensorD y = block.forward(x, nn::Mode::Train);
    const TensorD r = random_tensor(y.shape(), rng);
    const TensorD dx = block.backward(r);
    auto f = [&] { return block.forward(x, nn::Mode::Train); };
    double err = relative_error(dx.span(), numeric_gradient(f, x.span(), r));
    for (auto* p : params) err = std::max(err, relative_error(p->grad.span(), numeric_gradient(f, p->value.span(), r)));
    return err;
}

inline double check_loss_once(Rng& rng) {
    const int n = pick(rng, 1, 6), k = nn::ModelConfig{}.n_classes;
    const double alpha = rng.uniform(0.0, 0.3);
    TensorD z = random_tensor(Shape{std::size_t(n), std::size_t(k), 1, 1}, rng, 2.0);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_below(k));
    const auto res = nn::cross_entropy_smoothed(z, labels, alpha);
    const TensorD one(Shape{1, 1, 1, 1}, 1.0);
    auto f = [&] { return TensorD(Shape{1, 1, 1, 1}, nn::cross_entropy_smoothed(z, labels, alpha).loss); };
    return relative_error(res.grad.span(), numeric_gradient(f, z.span(), one));
}

/// Whole network with tiny widths. Error is taken over the concatenated
/// parameter gradient, skipping coordinates where the step crosses a kink.
inline double check_model_once(Rng& rng) {
    nn::ModelConfig cfg;
    cfg.stem = rng.coin() ? nn::Stem::Cifar : nn::Stem::ImageNet;
    cfg.stage_blocks = {1, 1, 1, 1};
    cfg.stage_widths = {2, 2, 3, 3};
    nn::Model<double> model(cfg);
    model.initialize(rng.next_u64());
    // Sized so the last stage still normalizes over >= 8 values.
    const std::size_t n = cfg.stem == nn::Stem::Cifar ? 2 : 8;
    TensorD x = random_tensor(Shape{n, 4, 16, 16}, rng);
    const TensorD y = model.forward(x, nn::Mode::Train);
    const TensorD r = random_tensor(y.shape(), rng);
    model.zero_grad();
    model.backward(r);
    auto f = [&] { return model.forward(x, nn::Mode::Train); };
    std::vector<double> a, b;
    model.visit_params([&](const std::string&, nn::Param<double>& p) {
        std::vector<bool> kinked;
        const auto numeric = numeric_gradient(f, p.value.span(), r, 1e-6, &kinked);
        for (std::size_t i = 0; i < numeric.size(); ++i)
            if (!kinked[i]) {
                a.push_back(p.grad[i]);
                b.push_back(numeric[i]);
            }
    });
    return relative_error(a, b);
}

struct LayerCheck {
    const char* name;
    double (*once)(Rng&);
};

inline constexpr LayerCheck kLayerChecks[] = {
    {"conv", check_conv_once},       {"batchnorm", check_batchnorm_once}, {"relu", check_relu_once},
    {"maxpool", check_maxpool_once}, {"avgpool", check_avgpool_once},     {"linear", check_linear_once},
    {"residual_block", check_block_once}, {"loss", check_loss_once},      {"model", check_model_once},
};

/// Runs `instances` random cases per layer.
inline std::vector<GradCheck> run_gradient_checks(std::uint64_t seed, int instances) {
    std::vector<GradCheck> out;
    for (std::size_t i = 0; i < std::size(kLayerChecks); ++i) {
        GradCheck g{kLayerChecks[i].name};
        for (int t = 0; t < instances; ++t) {
            Rng rng(stream_seed(seed, i, static_cast<std::uint64_t>(t)));
            g.record(kLayerChecks[i].once(rng));
            ++g.instances;
        }
        out.push_back(g);
    }
    return out;
}

// ---------------------------------------------------------------------------

/// One random convolution shape: optimized forward vs the direct loop,
/// compared for exact equality.
struct ConvCase {
    std::size_t n, ci, co, k, stride, pad, h, w;
};

inline ConvCase random_conv_case(Rng& rng) {
    ConvCase c{};
    c.k = std::array<std::size_t, 4>{1, 3, 5, 7}[rng.uniform_below(4)];
    c.stride = static_cast<std::size_t>(pick(rng, 1, 3));
    c.pad = static_cast<std::size_t>(pick(rng, 0, static_cast<int>(c.k / 2)));
    c.n = static_cast<std::size_t>(pick(rng, 1, 3));
    c.ci = static_cast<std::size_t>(pick(rng, 1, 8));
    c.co = static_cast<std::size_t>(pick(rng, 1, 8));
    const int lo = std::max(1, static_cast<int>(c.k) - 2 * static_cast<int>(c.pad));
    c.h = static_cast<std::size_t>(pick(rng, lo, 16));
    c.w = static_cast<std::size_t>(pick(rng, lo, 16));
    return c;
}

inline bool conv_matches_oracle(const ConvCase& c, Rng& rng) {
    nn::Conv2d<double> conv(c.ci, c.co, c.k, c.stride, c.pad);
    conv.weight().value = random_tensor(conv.weight().value.shape(), rng);
    const TensorD x = random_tensor(Shape{c.n, c.ci, c.h, c.w}, rng);
    return conv.forward(x, nn::Mode::Eval) == conv2d_naive(x, conv.weight().value, c.stride, c.pad);
}

} // namespace landcover::check
