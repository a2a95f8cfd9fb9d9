#pragma once

#include <utility>
#include <vector>

#include "credassign/tensor.hpp"

namespace credassign {

/// Geometry of a 2-D convolution; output side length for one spatial axis.
int conv_out_size(int in, int kernel, int stride, int padding);

/// Patch matrix for one sample: rows index output positions (oh*OW+ow),
/// columns index (c_in, kh, kw) flattened. Out-of-bounds (padding) entries
/// are zero.
template <typename T>
void im2row(const T* input, int C, int H, int W, int kH, int kW, int stride, int padding,
            T* rows);

/// Adjoint scatter of im2row: accumulates patch-row gradients back into the
/// input gradient plane.
template <typename T>
void row2im_add(const T* rows, int C, int H, int W, int kH, int kW, int stride, int padding,
                T* grad_input);

/// Cross-correlation of input [N,Cin,H,W] with kernel [Cout,Cin,kH,kW].
/// No kernel flip; the transposed op below is its exact adjoint.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel, int stride, int padding);

/// Jacobian-transpose product: maps output-shaped gradients back to
/// input-shaped gradients for the conv2d of the same geometry.
template <typename T>
TensorT<T> conv2d_transposed(const TensorT<T>& grad_out, const TensorT<T>& kernel, int stride,
                             int padding, int in_h, int in_w);

/// dKernel for conv2d: correlation of cached input patches with the output
/// gradient. rows may be reused from the forward pass; pass nullptr to
/// rebuild internally.
template <typename T>
TensorT<T> conv2d_grad_kernel(const TensorT<T>& input, const TensorT<T>& grad_out, int kH,
                              int kW, int stride, int padding);

struct PoolResult {
    // argmax holds, per output cell, the flat index into the input H*W plane.
    std::vector<int> argmax;
};

/// 2x2/stride-2 max pooling (the only configuration in scope). Ties break to
/// the first index in row-major window order. Returns output and fills
/// argmax indices for exact backward routing.
template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& input, int window, int stride, PoolResult& pool);

/// Routes grad_out entries to the recorded argmax positions of an
/// [N,C,H,W] input.
template <typename T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_out, const PoolResult& pool, int in_h,
                              int in_w);

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> relu(const TensorT<T>& t);

/// grad masked by the ReLU derivative at pre-activation u: passes where
/// u > 0, zero elsewhere (derivative at exactly 0 taken as 0).
template <typename T>
TensorT<T> relu_backward_mask(const TensorT<T>& grad, const TensorT<T>& u);

/// Mean cross-entropy over the batch and its exact logit gradient
/// (softmax - onehot)/N.
template <typename T>
std::pair<T, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits,
                                               const std::vector<int>& labels);

} // namespace credassign
