// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Compute kernels behind the differentiable ops. Each kernel has an
// OpenMP-parallel version (namespace kernels) and a straightforward serial
// version (namespace kernels::reference) with the same signature; the
// reference versions exist for the unit tests and the benchmark.

#include <cstddef>

namespace hicast::kernels {

struct ConvGeom {
    int batch = 1;
    int in_channels = 1;
    int height = 1;
    int width = 1;
    int out_channels = 1;
    int kernel = 1;
    int stride = 1;
    int pad = 0;

    int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

/// Number of threads OpenMP will use for a parallel region.
int max_threads();

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is MxK, op(B) is KxN.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

/// y[N,Co,Ho,Wo] = conv(x[N,Ci,H,W], w[Co,Ci,k,k]) + bias[Co] (bias may be null).
void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* bias, double* y);
/// dx += conv^T(dy, w)
void conv2d_backward_input(const ConvGeom& g, const double* dy, const double* w, double* dx);
/// dw += corr(x, dy); dbias += sum(dy) when dbias is non-null.
void conv2d_backward_weight(const ConvGeom& g, const double* x, const double* dy, double* dw, double* dbias);

/// out[c,y,x] = bilinear sample of src[c] at (x + flow_x, y + flow_y).
/// flow is channel-first [2,H,W]. Samples outside the image clamp to the border.
void bilinear_warp(int channels, int height, int width, const double* src, const double* flow, double* out);

/// gram[C,C] = F F^T / (C*HW) for features[C,HW].
void gram_matrix(int channels, int hw, const double* features, double* gram);

namespace reference {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);
void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* bias, double* y);
void conv2d_backward_input(const ConvGeom& g, const double* dy, const double* w, double* dx);
void conv2d_backward_weight(const ConvGeom& g, const double* x, const double* dy, double* dw, double* dbias);
void bilinear_warp(int channels, int height, int width, const double* src, const double* flow, double* out);
void gram_matrix(int channels, int hw, const double* features, double* gram);

}  // namespace reference

}  // namespace hicast::kernels
