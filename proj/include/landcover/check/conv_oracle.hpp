#pragma once

#include <cstddef>

#include "landcover/nn/layers.hpp"

namespace landcover::check {

/// Direct-loop convolution. Each output sums ci, ki, kj in that order,
/// skipping out-of-bounds taps.
template <class T>
nn::Tensor<T> conv2d_naive(const nn::Tensor<T>& x, const nn::Tensor<T>& weight, std::size_t stride, std::size_t pad) {
    const std::size_t n = x.n(), ci_n = x.c(), h = x.h(), w = x.w();
    const std::size_t co_n = weight.n(), k = weight.h();
    const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
    nn::Tensor<T> y(nn::Shape{n, co_n, oh, ow});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t co = 0; co < co_n; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    T acc = T(0);
                    for (std::size_t ci = 0; ci < ci_n; ++ci)
                        for (std::size_t ki = 0; ki < k; ++ki)
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                                const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                    ix >= static_cast<std::ptrdiff_t>(w))
                                    continue;
                                acc += weight.at(co, ci, ki, kj) * x.at(s, ci, static_cast<std::size_t>(iy),
                                                                        static_cast<std::size_t>(ix));
                            }
                    y.at(s, co, oy, ox) = acc;
                }
    return y;
}

} // namespace landcover::check
