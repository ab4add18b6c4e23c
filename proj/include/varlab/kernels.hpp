#pragma once

#include "varlab/tensor.hpp"

namespace varlab::kernels {

// Fixed-order tensor kernels. Contract: every output element is a strictly
// sequential reduction over its contraction axis, so results are bitwise
// identical across runs and across OpenMP thread counts. The parallel
// versions split work over independent output elements only; per-element
// arithmetic is shared with the serial reference in kernels::ref, which is
// kept for testing and benchmarking.

/// C[i,j] = sum_k A[i,k] * B[j,k]; A is m x k, B is n x k, C is m x n.
/// Contraction runs k = 0..k-1 in order.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Plain matrix product, A (m x k) times B (k x n). Same summation order
/// as a naive triple loop with the k-loop innermost.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// 2-d convolution, stride 1, zero padding `pad` per side.
/// input N x C x H x W, weight OC x C x KH x KW, bias length OC.
/// Per output element the reduction runs (c, kh, kw) in order.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad);

struct Conv2dGrads {
    Tensor input;   // N x C x H x W
    Tensor weight;  // OC x C x KH x KW
    Tensor bias;    // OC
};

/// Gradients of conv2d_forward. grad_weight reduces over (n, oh, ow) in
/// order; grad_input reduces over (oc, kh, kw) in order; grad_bias over
/// (n, oh, ow).
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            int pad);

struct PoolResult {
    Tensor output;             // N x C x H/2 x W/2
    std::vector<int> argmax;   // flat input index per output element
};

/// 2x2 max pool, stride 2. H and W must be even. Ties resolve to the first
/// element in (kh, kw) scan order.
PoolResult maxpool2x2_forward(const Tensor& input);

Tensor maxpool2x2_backward(const PoolResult& pooled, const Tensor& grad_out,
                           const std::vector<int>& input_shape);

namespace ref {

// Serial reference implementations: same arithmetic, no OpenMP. Tests
// assert bitwise equality against the parallel versions; the benchmark
// compares their throughput.

Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad);
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            int pad);

}  // namespace ref

}  // namespace varlab::kernels
