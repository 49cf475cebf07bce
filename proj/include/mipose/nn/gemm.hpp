#pragma once

// Small dense matrix kernels used by conv2d (im2col form). Loop orders are
// chosen so the inner loop streams contiguously; `__restrict` lets the
// compiler vectorize. C is accumulated into (callers zero it first when
// needed).

#include <cstddef>

namespace mipose::nn {

/// C[m,n] += sum_k A[m,k] * B[k,n]   (A: MxK, B: KxN, C: MxN, row-major)
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* __restrict crow = c + i * n;
        const T* __restrict arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* __restrict brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C[m,n] += sum_k A[m,k] * B[n,k]   (B given transposed: NxK)
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* __restrict arow = a + i * k;
        T* __restrict crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* __restrict brow = b + j * k;
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

/// C[m,n] += sum_k A[k,m] * B[k,n]   (A given transposed: KxM)
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* __restrict arow = a + p * m;
        const T* __restrict brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* __restrict crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace mipose::nn
