// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "hicast/autograd.hpp"

// Differentiable operations. Image-like tensors are NCHW.

namespace hicast::ops {

using ag::Var;

// Element-wise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var silu(const Var& a);
Var sigmoid(const Var& a);
/// Elementwise clamp; the gradient is passed only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);
/// log(sigmoid(a)), computed stably.
Var log_sigmoid(const Var& a);
/// sqrt(a + eps)
Var sqrt_eps(const Var& a, double eps);
/// a * s where s is a one-element tensor.
Var mul_scalar_var(const Var& a, const Var& s);

// Reductions to a one-element tensor of shape {1}.
Var sum(const Var& a);
Var mean(const Var& a);
/// sqrt(mean(a^2)); the gradient at a == 0 is taken as 0.
Var rms(const Var& a);
/// mean(a^2)
Var mean_square(const Var& a);

// Broadcasting over [N, C, ...].
/// x[N,C,...] + b[C]
Var add_channel_bias(const Var& x, const Var& b);
/// x[N,C,...] + e[N,C]
Var add_per_sample_channel(const Var& x, const Var& e);
/// x[N,C,...] * s[N,C]
Var mul_per_sample_channel(const Var& x, const Var& s);
/// x[N,...] * coeffs[n] (constant coefficients)
Var scale_per_sample(const Var& x, const std::vector<double>& coeffs);
/// x[N,C] + v[C]
Var add_row_vector(const Var& x, const Var& v);
/// Broadcast v[D] to [N, D].
Var broadcast_rows(const Var& v, int n);
/// Broadcast v[C] to [N, C, H, W].
Var broadcast_map(const Var& v, int n, int h, int w);

// Layers.
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad);
/// x[N,I] W[O,I]^T + b[O]
Var linear(const Var& x, const Var& w, const Var& b);
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps = 1e-5);
Var avg_pool2(const Var& x);
Var upsample_nearest2(const Var& x);
/// [N, C, H, W] -> [N, C*f*f, H/f, W/f]
Var pixel_unshuffle(const Var& x, int factor);
/// Inverse of pixel_unshuffle: [N, C*f*f, H, W] -> [N, C, H*f, W*f]
Var pixel_shuffle(const Var& x, int factor);
/// [N, C, H, W] -> [N, C]
Var global_avg_pool(const Var& x);
/// Per-sample, per-channel biased variance over spatial positions: [N,C,H,W] -> [N,C].
Var channel_variance(const Var& x);
/// Average over non-overlapping-or-not square windows at the given top-left
/// corners: x[N,C,H,W] -> [N, P, C] with P = corners.size() (same corners for every n).
Var patch_average(const Var& x, const std::vector<std::pair<int, int>>& corners, int size);
struct Window {
    int sample = 0;  // leading index into x
    int y = 0;
    int x = 0;
};
/// size x size crops: x[N,C,H,W] -> [K, C, size, size], K = windows.size().
Var crop_windows(const Var& x, const std::vector<Window>& windows, int size);
/// Rows of x[R, D] divided by max(||row||, eps).
Var l2_normalize_rows(const Var& x, double eps = 1e-8);

// Shape manipulation.
Var reshape(const Var& x, Shape shape);
/// General permutation of up to 6 dims.
Var permute(const Var& x, const std::vector<int>& perm);
Var concat(const std::vector<Var>& parts, int axis);
/// Rows idx of the leading dimension, in order (repeats allowed).
Var gather_leading(const Var& x, const std::vector<int>& idx);
Var slice_leading(const Var& x, int start, int count);

// Attention building blocks.
/// a[B,M,K] x b[B,K,N] -> [B,M,N]; trans_b uses b[B,N,K].
Var bmm(const Var& a, const Var& b, bool trans_b = false);
/// Softmax over the last dimension.
Var softmax_last(const Var& x);
/// x[B, M, N] + bias[M, N]
Var add_matrix_bias(const Var& x, const Var& bias);

/// Frame-axis convolution with kernel 3; edge frames are replicated. x holds `frames`
/// consecutive frames per clip: [B*F, C, H, W]; w[Co, Ci, 3]; b[Co].
Var temporal_conv(const Var& x, int frames, const Var& w, const Var& b);

/// Mean over rows of -log softmax(logits)[row, label[row]].
Var cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace hicast::ops
