#pragma once

#include <cstddef>
#include <vector>

namespace cola::kern {

// Dense row-major matmul kernels, accumulate form (C += ...). Loop orders are
// chosen so the innermost loop streams contiguous memory and vectorizes.

// C[n,p] += A[n,k] * B[k,p]
template <typename T>
void mm_nn_acc(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const T av = arow[l];
            const T* brow = b + l * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[n,p] += A[n,k] * B[p,k]^T
// Materializes B^T into a scratch buffer so the accumulation runs in the
// unit-stride form that vectorizes; the dot-product form does not.
template <typename T>
void mm_nt_acc(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t p) {
    thread_local std::vector<T> scratch;
    scratch.resize(k * p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t l = 0; l < k; ++l) scratch[l * p + j] = b[j * k + l];
    mm_nn_acc<T>(a, scratch.data(), c, n, k, p);
}

// C[k,p] += A[n,k]^T * B[n,p]
template <typename T>
void mm_tn_acc(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const T av = arow[l];
            T* crow = c + l * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
}

// y += alpha * x
template <typename T>
void axpy(const T* x, T* y, T alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

} // namespace cola::kern
