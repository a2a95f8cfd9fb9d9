#include "credassign/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "credassign/gemm.hpp"

namespace credassign {

int conv_out_size(int in, int kernel, int stride, int padding) {
    if (stride < 1) throw DimensionError("conv: stride must be >= 1");
    const int padded = in + 2 * padding;
    if (padded < kernel)
        throw DimensionError("conv: input smaller than kernel after padding");
    return (padded - kernel) / stride + 1;
}

template <typename T>
void im2row(const T* input, int C, int H, int W, int kH, int kW, int stride, int padding,
            T* rows) {
    const int OH = conv_out_size(H, kH, stride, padding);
    const int OW = conv_out_size(W, kW, stride, padding);
    const int patch = C * kH * kW;
    for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
            T* r = rows + (static_cast<std::size_t>(oh) * OW + ow) * patch;
            const int ih0 = oh * stride - padding;
            const int iw0 = ow * stride - padding;
            for (int c = 0; c < C; ++c) {
                const T* plane = input + static_cast<std::size_t>(c) * H * W;
                for (int kh = 0; kh < kH; ++kh) {
                    const int ih = ih0 + kh;
                    for (int kw = 0; kw < kW; ++kw) {
                        const int iw = iw0 + kw;
                        *r++ = (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                   ? plane[static_cast<std::size_t>(ih) * W + iw]
                                   : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void row2im_add(const T* rows, int C, int H, int W, int kH, int kW, int stride, int padding,
                T* grad_input) {
    const int OH = conv_out_size(H, kH, stride, padding);
    const int OW = conv_out_size(W, kW, stride, padding);
    const int patch = C * kH * kW;
    for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
            const T* r = rows + (static_cast<std::size_t>(oh) * OW + ow) * patch;
            const int ih0 = oh * stride - padding;
            const int iw0 = ow * stride - padding;
            for (int c = 0; c < C; ++c) {
                T* plane = grad_input + static_cast<std::size_t>(c) * H * W;
                for (int kh = 0; kh < kH; ++kh) {
                    const int ih = ih0 + kh;
                    for (int kw = 0; kw < kW; ++kw, ++r) {
                        const int iw = iw0 + kw;
                        if (ih >= 0 && ih < H && iw >= 0 && iw < W)
                            plane[static_cast<std::size_t>(ih) * W + iw] += *r;
                    }
                }
            }
        }
    }
}

namespace {

template <typename T>
void check_conv_shapes(const TensorT<T>& input, const TensorT<T>& kernel) {
    if (input.ndim() != 4 || kernel.ndim() != 4)
        throw DimensionError("conv2d: input and kernel must be 4-D");
    if (input.dim(1) != kernel.dim(1))
        throw DimensionError("conv2d: channel mismatch, input " + shape_str(input) +
                             " vs kernel " + shape_str(kernel));
}

} // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel, int stride, int padding) {
    check_conv_shapes(input, kernel);
    const int N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = kernel.dim(0), kH = kernel.dim(2), kW = kernel.dim(3);
    const int OH = conv_out_size(H, kH, stride, padding);
    const int OW = conv_out_size(W, kW, stride, padding);
    const int patch = Cin * kH * kW;

    TensorT<T> out({N, Cout, OH, OW});
    std::vector<T> rows(static_cast<std::size_t>(OH) * OW * patch);
    for (int n = 0; n < N; ++n) {
        const T* in_n = input.ptr() + static_cast<std::size_t>(n) * Cin * H * W;
        im2row(in_n, Cin, H, W, kH, kW, stride, padding, rows.data());
        // out[n] is [Cout, OH*OW] contiguous: one dot per (filter, position).
        gemm_tB(kernel.ptr(), rows.data(),
                out.ptr() + static_cast<std::size_t>(n) * Cout * OH * OW, Cout, patch,
                OH * OW);
    }
    return out;
}

template <typename T>
TensorT<T> conv2d_transposed(const TensorT<T>& grad_out, const TensorT<T>& kernel, int stride,
                             int padding, int in_h, int in_w) {
    if (grad_out.ndim() != 4 || kernel.ndim() != 4)
        throw DimensionError("conv2d_transposed: tensors must be 4-D");
    const int N = grad_out.dim(0), Cout = grad_out.dim(1);
    if (Cout != kernel.dim(0))
        throw DimensionError("conv2d_transposed: grad channels " + shape_str(grad_out) +
                             " do not match kernel " + shape_str(kernel));
    const int Cin = kernel.dim(1), kH = kernel.dim(2), kW = kernel.dim(3);
    const int OH = conv_out_size(in_h, kH, stride, padding);
    const int OW = conv_out_size(in_w, kW, stride, padding);
    if (OH != grad_out.dim(2) || OW != grad_out.dim(3))
        throw DimensionError("conv2d_transposed: grad spatial size inconsistent with geometry");
    const int patch = Cin * kH * kW;

    TensorT<T> grad_in({N, Cin, in_h, in_w});
    std::vector<T> rows(static_cast<std::size_t>(OH) * OW * patch);
    std::vector<T> kflat(static_cast<std::size_t>(Cout) * patch);
    std::memcpy(kflat.data(), kernel.ptr(), kflat.size() * sizeof(T));
    for (int n = 0; n < N; ++n) {
        const T* g = grad_out.ptr() + static_cast<std::size_t>(n) * Cout * OH * OW;
        // rows[x,:] = sum_c g[c,x] * kernel[c,:]
        gemm_tA(g, kflat.data(), rows.data(), OH * OW, Cout, patch);
        row2im_add(rows.data(), Cin, in_h, in_w, kH, kW, stride, padding,
                   grad_in.ptr() + static_cast<std::size_t>(n) * Cin * in_h * in_w);
    }
    return grad_in;
}

template <typename T>
TensorT<T> conv2d_grad_kernel(const TensorT<T>& input, const TensorT<T>& grad_out, int kH,
                              int kW, int stride, int padding) {
    const int N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = grad_out.dim(1), OH = grad_out.dim(2), OW = grad_out.dim(3);
    const int patch = Cin * kH * kW;

    TensorT<T> dk({Cout, Cin, kH, kW});
    std::vector<T> rows(static_cast<std::size_t>(OH) * OW * patch);
    for (int n = 0; n < N; ++n) {
        const T* in_n = input.ptr() + static_cast<std::size_t>(n) * Cin * H * W;
        im2row(in_n, Cin, H, W, kH, kW, stride, padding, rows.data());
        const T* g = grad_out.ptr() + static_cast<std::size_t>(n) * Cout * OH * OW;
        gemm(g, rows.data(), dk.ptr(), Cout, OH * OW, patch, /*acc=*/true);
    }
    return dk;
}

template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& input, int window, int stride, PoolResult& pool) {
    if (window != 2 || stride != 2)
        throw DimensionError("maxpool2d: only 2x2 stride-2 pooling is supported");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw DimensionError("maxpool2d: spatial size must be even, got " + shape_str(input));
    const int OH = H / 2, OW = W / 2;
    TensorT<T> out({N, C, OH, OW});
    pool.argmax.assign(static_cast<std::size_t>(N) * C * OH * OW, 0);
    std::size_t o = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const T* plane = input.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int oh = 0; oh < OH; ++oh) {
                for (int ow = 0; ow < OW; ++ow, ++o) {
                    const int ih = oh * 2, iw = ow * 2;
                    int best = ih * W + iw;
                    T bv = plane[best];
                    const int cand[3] = {ih * W + iw + 1, (ih + 1) * W + iw, (ih + 1) * W + iw + 1};
                    for (int idx : cand) {
                        if (plane[idx] > bv) {
                            bv = plane[idx];
                            best = idx;
                        }
                    }
                    out.data[o] = bv;
                    pool.argmax[o] = best;
                }
            }
        }
    }
    return out;
}

template <typename T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_out, const PoolResult& pool, int in_h,
                              int in_w) {
    const int N = grad_out.dim(0), C = grad_out.dim(1), OH = grad_out.dim(2), OW = grad_out.dim(3);
    if (pool.argmax.size() != grad_out.numel())
        throw StateError("maxpool2d_backward: argmax record does not match gradient shape");
    TensorT<T> grad_in({N, C, in_h, in_w});
    std::size_t o = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            T* plane = grad_in.ptr() + (static_cast<std::size_t>(n) * C + c) * in_h * in_w;
            for (int i = 0; i < OH * OW; ++i, ++o) plane[pool.argmax[o]] += grad_out.data[o];
        }
    }
    return grad_in;
}

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a) + " x " + shape_str(b));
    TensorT<T> c({a.dim(0), b.dim(1)});
    gemm(a.ptr(), b.ptr(), c.ptr(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& t) {
    TensorT<T> out(t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = t.data[i] > T(0) ? t.data[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> relu_backward_mask(const TensorT<T>& grad, const TensorT<T>& u) {
    if (!grad.same_shape(u)) throw DimensionError("relu_backward_mask: shape mismatch");
    TensorT<T> out(grad.shape);
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        out.data[i] = u.data[i] > T(0) ? grad.data[i] : T(0);
    return out;
}

template <typename T>
std::pair<T, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits,
                                               const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw DimensionError("softmax_cross_entropy: logits must be 2-D");
    const int N = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != N)
        throw DimensionError("softmax_cross_entropy: batch size mismatch");
    TensorT<T> dlogits({N, C});
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        const int y = labels[n];
        if (y < 0 || y >= C)
            throw DomainError("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside [0," + std::to_string(C) + ")");
        const T* row = logits.ptr() + static_cast<std::size_t>(n) * C;
        T mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c] - mx));
        const double logz = std::log(z);
        loss += logz - static_cast<double>(row[y] - mx);
        T* d = dlogits.ptr() + static_cast<std::size_t>(n) * C;
        for (int c = 0; c < C; ++c) {
            const double p = std::exp(static_cast<double>(row[c] - mx)) / z;
            d[c] = static_cast<T>((p - (c == y ? 1.0 : 0.0)) / N);
        }
    }
    return {static_cast<T>(loss / N), std::move(dlogits)};
}

#define CREDASSIGN_INSTANTIATE_OPS(T)                                                          \
    template void im2row<T>(const T*, int, int, int, int, int, int, int, T*);                  \
    template void row2im_add<T>(const T*, int, int, int, int, int, int, int, T*);              \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, int, int);             \
    template TensorT<T> conv2d_transposed<T>(const TensorT<T>&, const TensorT<T>&, int, int,   \
                                             int, int);                                       \
    template TensorT<T> conv2d_grad_kernel<T>(const TensorT<T>&, const TensorT<T>&, int, int,  \
                                              int, int);                                      \
    template TensorT<T> maxpool2d<T>(const TensorT<T>&, int, int, PoolResult&);                \
    template TensorT<T> maxpool2d_backward<T>(const TensorT<T>&, const PoolResult&, int, int); \
    template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                       \
    template TensorT<T> relu<T>(const TensorT<T>&);                                            \
    template TensorT<T> relu_backward_mask<T>(const TensorT<T>&, const TensorT<T>&);           \
    template std::pair<T, TensorT<T>> softmax_cross_entropy<T>(const TensorT<T>&,              \
                                                               const std::vector<int>&);

CREDASSIGN_INSTANTIATE_OPS(float)
CREDASSIGN_INSTANTIATE_OPS(double)

} // namespace credassign
