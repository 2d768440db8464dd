#pragma once

#include <algorithm>
#include <cstddef>
#include <type_traits>
#include <vector>

#include <cblas.h>

namespace landcover::nn {

/// Row-major C = A·B + beta·C with optional transposes; A is MxK, B is KxN
/// after transposition.
///
/// float dispatches to single-threaded BLAS. double (check mode) uses a
/// plain loop that accumulates each output in strictly increasing k, which
/// is the summation order of a direct convolution loop, so im2col-based
/// results are bitwise comparable against the naive oracle.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T beta,
          T* c) {
    const std::size_t lda = trans_a ? m : k;
    const std::size_t ldb = trans_b ? k : n;
    if constexpr (std::is_same_v<T, float>) {
        static const bool single = [] {
            openblas_set_num_threads(1);
            return true;
        }();
        (void)single;
        cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                    static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, a, static_cast<int>(lda), b,
                    static_cast<int>(ldb), beta, c, static_cast<int>(n));
    } else {
        std::vector<T> acc(n);
        for (std::size_t i = 0; i < m; ++i) {
            std::fill(acc.begin(), acc.end(), T(0));
            for (std::size_t p = 0; p < k; ++p) {
                const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
                if (trans_b) {
                    for (std::size_t j = 0; j < n; ++j) acc[j] += av * b[j * ldb + p];
                } else {
                    const T* brow = b + p * ldb;
                    for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
                }
            }
            T* crow = c + i * n;
            if (beta == T(0)) {
                for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
            } else {
                for (std::size_t j = 0; j < n; ++j) crow[j] = beta * crow[j] + acc[j];
            }
        }
    }
}

} // namespace landcover::nn
