// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "hicast/kernels.hpp"

namespace hicast::kernels::reference {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = trans_a ? a[p * lda + i] : a[i * lda + p];
                const double bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
                s += av * bv;
            }
            double& out = c[i * ldc + j];
            out = alpha * s + (beta == 0.0 ? 0.0 : beta * out);
        }
    }
}

void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* bias, double* y) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    for (int nb = 0; nb < g.batch; ++nb)
        for (int co = 0; co < g.out_channels; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double s = bias ? bias[co] : 0.0;
                    for (int ci = 0; ci < g.in_channels; ++ci)
                        for (int ky = 0; ky < g.kernel; ++ky)
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                                s += w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] *
                                     x[((nb * g.in_channels + ci) * g.height + iy) * g.width + ix];
                            }
                    y[((nb * g.out_channels + co) * ho + oy) * wo + ox] = s;
                }
}

void conv2d_backward_input(const ConvGeom& g, const double* dy, const double* w, double* dx) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    for (int nb = 0; nb < g.batch; ++nb)
        for (int co = 0; co < g.out_channels; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double d = dy[((nb * g.out_channels + co) * ho + oy) * wo + ox];
                    for (int ci = 0; ci < g.in_channels; ++ci)
                        for (int ky = 0; ky < g.kernel; ++ky)
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                                dx[((nb * g.in_channels + ci) * g.height + iy) * g.width + ix] +=
                                    d * w[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
                            }
                }
}

void conv2d_backward_weight(const ConvGeom& g, const double* x, const double* dy, double* dw, double* dbias) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    for (int nb = 0; nb < g.batch; ++nb)
        for (int co = 0; co < g.out_channels; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double d = dy[((nb * g.out_channels + co) * ho + oy) * wo + ox];
                    if (dbias) dbias[co] += d;
                    for (int ci = 0; ci < g.in_channels; ++ci)
                        for (int ky = 0; ky < g.kernel; ++ky)
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
                                dw[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] +=
                                    d * x[((nb * g.in_channels + ci) * g.height + iy) * g.width + ix];
                            }
                }
}

void bilinear_warp(int channels, int height, int width, const double* src, const double* flow, double* out) {
    const int plane = height * width;
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const int p = y * width + x;
                const double sx = std::clamp(x + flow[p], 0.0, width - 1.0);
                const double sy = std::clamp(y + flow[plane + p], 0.0, height - 1.0);
                double acc = 0.0;
                // Tent-weighted sum over the whole plane.
                for (int qy = 0; qy < height; ++qy)
                    for (int qx = 0; qx < width; ++qx) {
                        const double wx = std::max(0.0, 1.0 - std::abs(sx - qx));
                        const double wy = std::max(0.0, 1.0 - std::abs(sy - qy));
                        if (wx > 0.0 && wy > 0.0) acc += wx * wy * src[c * plane + qy * width + qx];
                    }
                out[c * plane + p] = acc;
            }
}

void gram_matrix(int channels, int hw, const double* features, double* gram) {
    for (int i = 0; i < channels; ++i)
        for (int j = 0; j < channels; ++j) {
            double s = 0.0;
            for (int p = 0; p < hw; ++p) s += features[i * hw + p] * features[j * hw + p];
            gram[i * channels + j] = s / (static_cast<double>(channels) * hw);
        }
}

}  // namespace hicast::kernels::reference
