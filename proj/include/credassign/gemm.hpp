#pragma once

#include <cstddef>

namespace credassign {

// Row-major matrix kernels. Every output element is accumulated in ascending
// k order, so results are bitwise reproducible run to run.

/// C[m,n] = A[m,k] * B[k,n]; accumulates into C when acc is true.
template <typename T>
void gemm(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false);

/// C[m,n] = A[k,m]^T * B[k,n]; A is stored [k,m].
template <typename T>
void gemm_tA(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false);

/// C[m,n] = A[m,k] * B[n,k]^T; dot products of contiguous rows.
template <typename T>
void gemm_tB(const T* A, const T* B, T* C, int m, int k, int n, bool acc = false);

} // namespace credassign
