#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "landcover/error.hpp"

namespace landcover::nn {

/// NCHW shape. Vectors and matrices use trailing unit dimensions, e.g. a
/// (N,K) logit matrix is {N,K,1,1} and a per-channel vector is {C,1,1,1}.
struct Shape {
    std::size_t n = 1, c = 1, h = 1, w = 1;

    std::size_t numel() const noexcept { return n * c * h * w; }
    std::array<std::size_t, 4> dims() const noexcept { return {n, c, h, w}; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

/// Dense row-major tensor. T is float for training and inference, double for
/// the check mode used by gradient and oracle verification.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(s.numel(), fill) {}
    Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) fail(ErrorCode::ShapeMismatch, "data length does not match shape");
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t n() const noexcept { return shape_.n; }
    std::size_t c() const noexcept { return shape_.c; }
    std::size_t h() const noexcept { return shape_.h; }
    std::size_t w() const noexcept { return shape_.w; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }
    std::vector<T>& vec() noexcept { return data_; }
    const std::vector<T>& vec() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }

    /// Contiguous block of one sample.
    std::span<T> sample(std::size_t i) noexcept {
        const std::size_t stride = shape_.c * shape_.h * shape_.w;
        return std::span(data_).subspan(i * stride, stride);
    }
    std::span<const T> sample(std::size_t i) const noexcept {
        const std::size_t stride = shape_.c * shape_.h * shape_.w;
        return std::span(data_).subspan(i * stride, stride);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

template <class T>
bool all_finite(std::span<const T> v) noexcept {
    for (T x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// NaN or Inf anywhere is a hard error.
template <class T>
void ensure_finite(const Tensor<T>& t, const std::string& where) {
    if (!all_finite(t.span())) fail(ErrorCode::NonFinite, "non-finite value in " + where);
}

inline void expect_shape(const Shape& got, const Shape& want, const std::string& what) {
    if (got != want) fail(ErrorCode::ShapeMismatch, what + ": got " + to_string(got) + ", expected " + to_string(want));
}

} // namespace landcover::nn
