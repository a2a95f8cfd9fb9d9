#include "credassign/gemm.hpp"

#include <algorithm>
#include <cstring>

namespace credassign {

namespace {

// Column-tile width. Keeps an m x NJ output tile plus the streamed B rows in
// cache while B is read exactly once per tile sweep.
constexpr int kTileCols = 256;

template <typename T>
void zero(T* p, std::size_t n) {
    std::memset(p, 0, n * sizeof(T));
}

} // namespace

template <typename T>
void gemm(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    if (!acc) zero(C, static_cast<std::size_t>(m) * n);
    for (int j0 = 0; j0 < n; j0 += kTileCols) {
        const int j1 = std::min(n, j0 + kTileCols);
        for (int p = 0; p < k; ++p) {
            const T* b = B + static_cast<std::size_t>(p) * n;
            for (int i = 0; i < m; ++i) {
                const T a = A[static_cast<std::size_t>(i) * k + p];
                if (a == T(0)) continue;
                T* c = C + static_cast<std::size_t>(i) * n;
                for (int j = j0; j < j1; ++j) c[j] += a * b[j];
            }
        }
    }
}

template <typename T>
void gemm_tA(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    if (!acc) zero(C, static_cast<std::size_t>(m) * n);
    for (int j0 = 0; j0 < n; j0 += kTileCols) {
        const int j1 = std::min(n, j0 + kTileCols);
        for (int p = 0; p < k; ++p) {
            const T* b = B + static_cast<std::size_t>(p) * n;
            const T* arow = A + static_cast<std::size_t>(p) * m;
            for (int i = 0; i < m; ++i) {
                const T a = arow[i];
                if (a == T(0)) continue;
                T* c = C + static_cast<std::size_t>(i) * n;
                for (int j = j0; j < j1; ++j) c[j] += a * b[j];
            }
        }
    }
}

namespace {

// Lane-parallel dot product: W independent partial sums, combined in fixed
// lane order at the end. Vectorizes without reassociation flags.
template <typename T, int W = 16>
T lane_dot(const T* a, const T* b, int k) {
    T acc[W] = {};
    int p = 0;
    for (; p + W <= k; p += W)
        for (int w = 0; w < W; ++w) acc[w] += a[p + w] * b[p + w];
    for (; p < k; ++p) acc[0] += a[p] * b[p];
    T s = 0;
    for (int w = 0; w < W; ++w) s += acc[w];
    return s;
}

// Four rows of B against one row of A at a time: one A load feeds four FMAs.
template <typename T, int W = 16>
void lane_dot4(const T* a, const T* b0, const T* b1, const T* b2, const T* b3, int k, T out[4]) {
    T acc0[W] = {}, acc1[W] = {}, acc2[W] = {}, acc3[W] = {};
    int p = 0;
    for (; p + W <= k; p += W) {
        for (int w = 0; w < W; ++w) {
            const T av = a[p + w];
            acc0[w] += av * b0[p + w];
            acc1[w] += av * b1[p + w];
            acc2[w] += av * b2[p + w];
            acc3[w] += av * b3[p + w];
        }
    }
    for (; p < k; ++p) {
        const T av = a[p];
        acc0[0] += av * b0[p];
        acc1[0] += av * b1[p];
        acc2[0] += av * b2[p];
        acc3[0] += av * b3[p];
    }
    out[0] = out[1] = out[2] = out[3] = 0;
    for (int w = 0; w < W; ++w) {
        out[0] += acc0[w];
        out[1] += acc1[w];
        out[2] += acc2[w];
        out[3] += acc3[w];
    }
}

} // namespace

template <typename T>
void gemm_tB(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * k;
        T* c = C + static_cast<std::size_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const T* b = B + static_cast<std::size_t>(j) * k;
            T out[4];
            lane_dot4<T>(a, b, b + k, b + 2 * static_cast<std::size_t>(k), b + 3 * static_cast<std::size_t>(k), k, out);
            if (acc) {
                c[j] += out[0];
                c[j + 1] += out[1];
                c[j + 2] += out[2];
                c[j + 3] += out[3];
            } else {
                c[j] = out[0];
                c[j + 1] = out[1];
                c[j + 2] = out[2];
                c[j + 3] = out[3];
            }
        }
        for (; j < n; ++j) {
            const T d = lane_dot<T>(a, B + static_cast<std::size_t>(j) * k, k);
            if (acc)
                c[j] += d;
            else
                c[j] = d;
        }
    }
}

template void gemm<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_tA<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_tA<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_tB<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_tB<double>(const double*, const double*, double*, int, int, int, bool);

} // namespace credassign
