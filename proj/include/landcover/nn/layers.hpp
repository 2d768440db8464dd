#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "landcover/nn/gemm.hpp"
#include "landcover/nn/tensor.hpp"
#include "landcover/parallel.hpp"

namespace landcover::nn {

enum class Mode { Train, Eval };

template <class T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;

    explicit Param(Shape s = {0, 0, 0, 0}) : value(s), grad(s) {}
};

// ---------------------------------------------------------------------------
// Convolution

struct ConvGeometry {
    std::size_t in_ch, out_ch, kernel, stride, pad;

    std::size_t out_dim(std::size_t in) const {
        if (in + 2 * pad < kernel) fail(ErrorCode::ShapeMismatch, "convolution input smaller than kernel");
        return (in + 2 * pad - kernel) / stride + 1;
    }
    std::size_t patch() const { return in_ch * kernel * kernel; }
};

/// Unrolls one CHW sample into a (Ci*k*k) x (Ho*Wo) matrix with row stride
/// `ld`; row index is (ci*k + ki)*k + kj. Out-of-bounds taps are zero.
template <class T>
void im2col(const ConvGeometry& g, const T* x, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* cols,
            std::size_t ld = 0) {
    const std::size_t hw_out = ld ? ld : oh * ow;
    for (std::size_t ci = 0; ci < g.in_ch; ++ci)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                T* row = cols + ((ci * g.kernel + ki) * g.kernel + kj) * hw_out;
                const T* plane = x + ci * h * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
                    T* dst = row + oy * ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * w;
                    if (g.stride == 1) {
                        // Contiguous run of in-bounds taps, zeros on either side.
                        const auto off = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad);
                        const auto lo = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(-off, 0, ow));
                        const auto hi = static_cast<std::size_t>(
                            std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - off, lo, ow));
                        std::fill(dst, dst + lo, T(0));
                        std::copy(src + lo + off, src + hi + off, dst + lo);
                        std::fill(dst + hi, dst + ow, T(0));
                        continue;
                    }
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[ix];
                    }
                }
            }
}

/// Adjoint of im2col: scatters-adds a column matrix back onto a CHW sample.
template <class T>
void col2im(const ConvGeometry& g, const T* cols, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* x,
            std::size_t ld = 0) {
    const std::size_t hw_out = ld ? ld : oh * ow;
    for (std::size_t ci = 0; ci < g.in_ch; ++ci)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const T* row = cols + ((ci * g.kernel + ki) * g.kernel + kj) * hw_out;
                T* plane = x + ci * h * w;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * w;
                    const T* src = row + oy * ow;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
                    }
                }
            }
}

/// Bias-free 2-D cross-correlation with zero padding, computed per sample as
/// weight(Co x Ci*k*k) · im2col(x).
template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad)
        : geo_{in_ch, out_ch, kernel, stride, pad}, weight_(Shape{out_ch, in_ch, kernel, kernel}) {}

    const ConvGeometry& geometry() const noexcept { return geo_; }
    Param<T>& weight() noexcept { return weight_; }
    const Param<T>& weight() const noexcept { return weight_; }

    /// Skips the input gradient in backward (first layer of a network).
    void set_input_grad(bool enabled) noexcept { input_grad_ = enabled; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::Train) {
        if (x.c() != geo_.in_ch) fail(ErrorCode::ShapeMismatch, "conv input has " + std::to_string(x.c()) +
                                                                   " channels, expected " + std::to_string(geo_.in_ch));
        if (mode == Mode::Eval) return apply(x, weight_.value);
        input_ = x;
        return apply_grouped(x);
    }

    /// Input gradient (empty tensor when disabled); accumulates the weight gradient.
    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = input_;
        const std::size_t n = x.n(), h = x.h(), w = x.w();
        const std::size_t oh = geo_.out_dim(h), ow = geo_.out_dim(w);
        expect_shape(dy.shape(), Shape{n, geo_.out_ch, oh, ow}, "conv backward");
        const std::size_t kdim = geo_.patch(), hw_out = oh * ow, wsize = weight_.value.size();

        Tensor<T> dx;
        if (input_grad_) dx = Tensor<T>(x.shape());

        // Weight gradient: fixed chunking by sample index, chunks reduced in
        // order, so the sum does not depend on the worker count.
        const std::size_t chunks = std::min<std::size_t>(n, kGradChunks);
        const std::size_t group = group_size(hw_out);
        std::vector<std::vector<T>> partial(chunks, std::vector<T>(wsize, T(0)));
        parallel_for(chunks, [&](std::size_t ch) {
            const std::size_t lo = ch * n / chunks, hi = (ch + 1) * n / chunks;
            std::vector<T> cols, dys, dcols;
            for (std::size_t g0 = lo; g0 < hi; g0 += group) {
                const std::size_t cnt = std::min(hi, g0 + group) - g0, ld = cnt * hw_out;
                cols.resize(kdim * ld);
                dys.resize(geo_.out_ch * ld);
                for (std::size_t j = 0; j < cnt; ++j) {
                    im2col(geo_, x.sample(g0 + j).data(), h, w, oh, ow, cols.data() + j * hw_out, ld);
                    const T* src = dy.sample(g0 + j).data();
                    for (std::size_t co = 0; co < geo_.out_ch; ++co)
                        std::copy_n(src + co * hw_out, hw_out, dys.data() + co * ld + j * hw_out);
                }
                gemm<T>(false, true, geo_.out_ch, kdim, ld, dys.data(), cols.data(), T(1), partial[ch].data());
                if (!input_grad_) continue;
                dcols.resize(kdim * ld);
                gemm<T>(true, false, kdim, ld, geo_.out_ch, weight_.value.data(), dys.data(), T(0), dcols.data());
                for (std::size_t j = 0; j < cnt; ++j)
                    col2im(geo_, dcols.data() + j * hw_out, h, w, oh, ow, dx.sample(g0 + j).data(), ld);
            }
        });
        T* gw = weight_.grad.data();
        for (const auto& p : partial)
            for (std::size_t i = 0; i < wsize; ++i) gw[i] += p[i];
        return dx;
    }

    /// Forward with an explicit weight, no caching.
    Tensor<T> apply(const Tensor<T>& x, const Tensor<T>& weight) const {
        const std::size_t n = x.n(), h = x.h(), w = x.w();
        const std::size_t oh = geo_.out_dim(h), ow = geo_.out_dim(w);
        const std::size_t kdim = geo_.patch(), hw_out = oh * ow;
        Tensor<T> y(Shape{n, geo_.out_ch, oh, ow});
        parallel_for(n, [&](std::size_t s) {
            const T* xs = x.sample(s).data();
            if (is_pointwise()) {
                gemm<T>(false, false, geo_.out_ch, hw_out, kdim, weight.data(), xs, T(0), y.sample(s).data());
                return;
            }
            std::vector<T> cols(kdim * hw_out);
            im2col(geo_, xs, h, w, oh, ow, cols.data());
            gemm<T>(false, false, geo_.out_ch, hw_out, kdim, weight.data(), cols.data(), T(0), y.sample(s).data());
        });
        return y;
    }

    void release_cache() { input_ = Tensor<T>(); }

private:
    static constexpr std::size_t kGradChunks = 4;
    static constexpr std::size_t kMinColumns = 2048;

    /// Samples per GEMM in training, so late stages with few output pixels
    /// still give BLAS wide matrices.
    static std::size_t group_size(std::size_t hw_out) { return std::max<std::size_t>(1, kMinColumns / hw_out); }

    /// Train-mode forward: several samples side by side in one GEMM. Eval
    /// keeps one GEMM per sample so predictions do not depend on batch size.
    Tensor<T> apply_grouped(const Tensor<T>& x) const {
        const std::size_t n = x.n(), h = x.h(), w = x.w();
        const std::size_t oh = geo_.out_dim(h), ow = geo_.out_dim(w);
        const std::size_t kdim = geo_.patch(), hw_out = oh * ow, group = group_size(hw_out);
        Tensor<T> y(Shape{n, geo_.out_ch, oh, ow});
        const std::size_t groups = (n + group - 1) / group;
        parallel_for(groups, [&](std::size_t gi) {
            const std::size_t g0 = gi * group, cnt = std::min(n, g0 + group) - g0, ld = cnt * hw_out;
            std::vector<T> cols(kdim * ld), out(geo_.out_ch * ld);
            for (std::size_t j = 0; j < cnt; ++j)
                im2col(geo_, x.sample(g0 + j).data(), h, w, oh, ow, cols.data() + j * hw_out, ld);
            gemm<T>(false, false, geo_.out_ch, ld, kdim, weight_.value.data(), cols.data(), T(0), out.data());
            for (std::size_t j = 0; j < cnt; ++j) {
                T* dst = y.sample(g0 + j).data();
                for (std::size_t co = 0; co < geo_.out_ch; ++co)
                    std::copy_n(out.data() + co * ld + j * hw_out, hw_out, dst + co * hw_out);
            }
        });
        return y;
    }

    bool is_pointwise() const noexcept { return geo_.kernel == 1 && geo_.stride == 1 && geo_.pad == 0; }

    ConvGeometry geo_{};
    Param<T> weight_;
    Tensor<T> input_;
    bool input_grad_ = true;
};

// ---------------------------------------------------------------------------
// Batch normalization

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

/// Per-channel batch normalization. Train mode normalizes with the biased
/// batch variance and folds the unbiased variance into the running estimate
/// with momentum 0.1; eval mode uses the running estimates.
template <class T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(std::size_t channels)
        : gamma_(Shape{channels}), beta_(Shape{channels}), running_mean_(Shape{channels}, T(0)),
          running_var_(Shape{channels}, T(1)) {
        gamma_.value.fill(T(1));
    }

    std::size_t channels() const noexcept { return gamma_.value.size(); }
    Param<T>& gamma() noexcept { return gamma_; }
    Param<T>& beta() noexcept { return beta_; }
    Tensor<T>& running_mean() noexcept { return running_mean_; }
    Tensor<T>& running_var() noexcept { return running_var_; }
    const Tensor<T>& running_mean() const noexcept { return running_mean_; }
    const Tensor<T>& running_var() const noexcept { return running_var_; }
    bool has_stats() const noexcept { return has_stats_; }
    void set_has_stats(bool v) noexcept { has_stats_ = v; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        const std::size_t n = x.n(), c = x.c(), hw = x.h() * x.w();
        if (c != channels()) fail(ErrorCode::ShapeMismatch, "batch norm channel count mismatch");
        Tensor<T> y(x.shape());
        if (mode == Mode::Eval) {
            if (!has_stats_) fail(ErrorCode::EvalBeforeStats, "batch norm evaluated before running statistics exist");
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[ch]) + kBnEps));
                const T scale = gamma_.value[ch] * inv;
                const T shift = beta_.value[ch] - running_mean_[ch] * scale;
                for (std::size_t s = 0; s < n; ++s) {
                    const T* src = x.data() + (s * c + ch) * hw;
                    T* dst = y.data() + (s * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * scale + shift;
                }
            }
            last_mode_ = Mode::Eval;
            return y;
        }

        const double m = static_cast<double>(n * hw);
        xhat_ = Tensor<T>(x.shape());
        inv_std_.assign(c, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double sum = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* src = x.data() + (s * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) sum += src[i];
            }
            const double mean = sum / m;
            double sq = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* src = x.data() + (s * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = src[i] - mean;
                    sq += d * d;
                }
            }
            const double var = sq / m;
            const double inv = 1.0 / std::sqrt(var + kBnEps);
            inv_std_[ch] = inv;
            const double g = gamma_.value[ch], b = beta_.value[ch];
            for (std::size_t s = 0; s < n; ++s) {
                const T* src = x.data() + (s * c + ch) * hw;
                T* xh = xhat_.data() + (s * c + ch) * hw;
                T* dst = y.data() + (s * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double v = (src[i] - mean) * inv;
                    xh[i] = static_cast<T>(v);
                    dst[i] = static_cast<T>(g * v + b);
                }
            }
            const double unbiased = m > 1 ? var * m / (m - 1) : var;
            running_mean_[ch] = static_cast<T>((1 - kBnMomentum) * running_mean_[ch] + kBnMomentum * mean);
            running_var_[ch] = static_cast<T>((1 - kBnMomentum) * running_var_[ch] + kBnMomentum * unbiased);
        }
        has_stats_ = true;
        last_mode_ = Mode::Train;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t n = dy.n(), c = dy.c(), hw = dy.h() * dy.w();
        Tensor<T> dx(dy.shape());
        if (last_mode_ == Mode::Eval) fail(ErrorCode::InvalidArgument, "batch norm backward requires a train-mode forward");
        expect_shape(dy.shape(), xhat_.shape(), "batch norm backward");
        const double m = static_cast<double>(n * hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double dgamma = 0.0, dbeta = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const T* g = dy.data() + (s * c + ch) * hw;
                const T* xh = xhat_.data() + (s * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    dgamma += static_cast<double>(g[i]) * xh[i];
                    dbeta += g[i];
                }
            }
            gamma_.grad[ch] += static_cast<T>(dgamma);
            beta_.grad[ch] += static_cast<T>(dbeta);
            const double k = gamma_.value[ch] * inv_std_[ch] / m;
            for (std::size_t s = 0; s < n; ++s) {
                const T* g = dy.data() + (s * c + ch) * hw;
                const T* xh = xhat_.data() + (s * c + ch) * hw;
                T* d = dx.data() + (s * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) d[i] = static_cast<T>(k * (m * g[i] - dbeta - xh[i] * dgamma));
            }
        }
        return dx;
    }

    void release_cache() { xhat_ = Tensor<T>(); }

private:
    Param<T> gamma_;
    Param<T> beta_;
    Tensor<T> running_mean_;
    Tensor<T> running_var_;
    bool has_stats_ = false;
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
    Mode last_mode_ = Mode::Train;
};

// ---------------------------------------------------------------------------
// Activations and pooling

template <class T>
class ReLU {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::Train) {
        Tensor<T> y(x.shape());
        if (mode == Mode::Train) mask_.assign(x.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool on = x[i] > T(0);
            y[i] = on ? x[i] : T(0);
            if (mode == Mode::Train) mask_[i] = on;
        }
        shape_ = x.shape();
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        expect_shape(dy.shape(), shape_, "relu backward");
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : T(0);
        return dx;
    }

    void release_cache() { mask_.clear(); }

private:
    std::vector<std::uint8_t> mask_;
    Shape shape_{};
};

/// Max pooling with -inf padding; gradient routes to the first maximal tap.
template <class T>
class MaxPool2d {
public:
    MaxPool2d(std::size_t kernel = 3, std::size_t stride = 2, std::size_t pad = 1)
        : kernel_(kernel), stride_(stride), pad_(pad) {}

    Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::Train) {
        const std::size_t oh = (x.h() + 2 * pad_ - kernel_) / stride_ + 1;
        const std::size_t ow = (x.w() + 2 * pad_ - kernel_) / stride_ + 1;
        Tensor<T> y(Shape{x.n(), x.c(), oh, ow});
        if (mode == Mode::Train) argmax_.assign(y.size(), 0);
        in_shape_ = x.shape();
        for (std::size_t p = 0; p < x.n() * x.c(); ++p) {
            const T* plane = x.data() + p * x.h() * x.w();
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t arg = 0;
                    for (std::size_t ki = 0; ki < kernel_; ++ki)
                        for (std::size_t kj = 0; kj < kernel_; ++kj) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
                            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kj) - static_cast<std::ptrdiff_t>(pad_);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(x.h()) ||
                                ix >= static_cast<std::ptrdiff_t>(x.w()))
                                continue;
                            const std::size_t idx = static_cast<std::size_t>(iy) * x.w() + static_cast<std::size_t>(ix);
                            if (plane[idx] > best) {
                                best = plane[idx];
                                arg = idx;
                            }
                        }
                    const std::size_t o = (p * oh + oy) * ow + ox;
                    y[o] = best;
                    if (mode == Mode::Train) argmax_[o] = p * x.h() * x.w() + arg;
                }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape_);
        for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
        return dx;
    }

    void release_cache() { argmax_.clear(); }

private:
    std::size_t kernel_, stride_, pad_;
    std::vector<std::size_t> argmax_;
    Shape in_shape_{};
};

/// (N,C,H,W) -> (N,C,1,1) mean over spatial positions.
template <class T>
class GlobalAvgPool {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode = Mode::Train) {
        in_shape_ = x.shape();
        const std::size_t hw = x.h() * x.w();
        Tensor<T> y(Shape{x.n(), x.c(), 1, 1});
        for (std::size_t p = 0; p < x.n() * x.c(); ++p) {
            const T* src = x.data() + p * hw;
            T acc = T(0);
            for (std::size_t i = 0; i < hw; ++i) acc += src[i];
            y[p] = acc / static_cast<T>(hw);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t hw = in_shape_.h * in_shape_.w;
        Tensor<T> dx(in_shape_);
        for (std::size_t p = 0; p < in_shape_.n * in_shape_.c; ++p) {
            const T g = dy[p] / static_cast<T>(hw);
            std::fill(dx.data() + p * hw, dx.data() + (p + 1) * hw, g);
        }
        return dx;
    }

private:
    Shape in_shape_{};
};

/// y = W x + b per sample; W is (out, in).
template <class T>
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out) : weight_(Shape{out, in}), bias_(Shape{out}) {}

    Param<T>& weight() noexcept { return weight_; }
    Param<T>& bias() noexcept { return bias_; }
    std::size_t in_features() const noexcept { return weight_.value.c(); }
    std::size_t out_features() const noexcept { return weight_.value.n(); }

    Tensor<T> forward(const Tensor<T>& x, Mode mode = Mode::Train) {
        const std::size_t n = x.n(), in = in_features(), out = out_features();
        if (x.c() * x.h() * x.w() != in) fail(ErrorCode::ShapeMismatch, "linear input feature count mismatch");
        if (mode == Mode::Train) input_ = x;
        Tensor<T> y(Shape{n, out});
        for (std::size_t s = 0; s < n; ++s) {
            const T* xs = x.data() + s * in;
            for (std::size_t o = 0; o < out; ++o) {
                const T* wr = weight_.value.data() + o * in;
                T acc = T(0);
                for (std::size_t f = 0; f < in; ++f) acc += wr[f] * xs[f];
                y[s * out + o] = acc + bias_.value[o];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t n = input_.n(), in = in_features(), out = out_features();
        Tensor<T> dx(input_.shape());
        for (std::size_t s = 0; s < n; ++s) {
            const T* xs = input_.data() + s * in;
            T* dxs = dx.data() + s * in;
            for (std::size_t o = 0; o < out; ++o) {
                const T g = dy[s * out + o];
                bias_.grad[o] += g;
                T* gw = weight_.grad.data() + o * in;
                const T* wr = weight_.value.data() + o * in;
                for (std::size_t f = 0; f < in; ++f) {
                    gw[f] += g * xs[f];
                    dxs[f] += g * wr[f];
                }
            }
        }
        return dx;
    }

    void release_cache() { input_ = Tensor<T>(); }

private:
    Param<T> weight_;
    Param<T> bias_;
    Tensor<T> input_;
};

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    expect_shape(b.shape(), a.shape(), "elementwise add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

} // namespace landcover::nn
