#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "landcover/nn/tensor.hpp"

namespace landcover::nn {

/// Smoothed target for a one-hot label: y(1 - alpha) + alpha / K.
inline std::vector<double> smooth_labels(int label, int num_classes, double alpha) {
    if (label < 0 || label >= num_classes) fail(ErrorCode::InvalidArgument, "label outside 0..K-1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, "label smoothing factor outside [0,1]");
    std::vector<double> y(static_cast<std::size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) y[k] = (k == label ? 1.0 : 0.0) * (1.0 - alpha) + alpha / num_classes;
    return y;
}

template <class T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;              // d(loss)/d(logits), same shape as the logits
    std::vector<int> predicted;  // argmax per row, ties to the lower class
};

/// Row-wise softmax with max subtraction, accumulated in index order.
inline void softmax_row(std::span<const double> z, std::span<double> p) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        p[k] = std::exp(z[k] - mx);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
}

/// Mean over rows of -sum_k y_LS_k log softmax(z)_k; gradient (softmax - y_LS)/N.
template <class T>
LossResult<T> cross_entropy_smoothed(const Tensor<T>& logits, std::span<const int> labels, double alpha) {
    const std::size_t n = logits.n(), k = logits.c() * logits.h() * logits.w();
    if (labels.size() != n) fail(ErrorCode::ShapeMismatch, "one label per logit row required");
    if (n == 0) fail(ErrorCode::EmptySampleSet, "cross entropy over an empty batch");
    if (!all_finite(logits.span())) fail(ErrorCode::NonFiniteLogits, "logits contain NaN or Inf");

    LossResult<T> r;
    r.grad = Tensor<T>(logits.shape());
    r.predicted.resize(n);
    std::vector<double> z(k), p(k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(logits[i * k + j]);
        double mx = z[0];
        int arg = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (z[j] > mx) {
                mx = z[j];
                arg = static_cast<int>(j);
            }
        r.predicted[i] = arg;
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const double log_sum = std::log(sum);
        const auto y = smooth_labels(labels[i], static_cast<int>(k), alpha);
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double log_p = z[j] - mx - log_sum;
            row -= y[j] * log_p;
            r.grad[i * k + j] = static_cast<T>((std::exp(log_p) - y[j]) / static_cast<double>(n));
        }
        total += row;
    }
    r.loss = total / static_cast<double>(n);
    return r;
}

} // namespace landcover::nn
