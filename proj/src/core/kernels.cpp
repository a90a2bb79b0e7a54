// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/kernels.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hicast::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelWork = 1L << 16;

bool want_parallel(long work) { return work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1; }

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using Stride = Eigen::OuterStride<>;

// A row-major [rows, cols] view; transposed storage is read as column-major.
template <class Fn>
void with_view(bool trans, const double* p, int rows, int cols, int ld, Fn&& fn) {
    if (trans)
        fn(Eigen::Map<const ColMajor, 0, Stride>(p, rows, cols, Stride(ld)));
    else
        fn(Eigen::Map<const RowMajor, 0, Stride>(p, rows, cols, Stride(ld)));
}

// Rows of C are split into fixed-size panels, each computed by one thread
// with Eigen's single-threaded product. Panel sizes do not depend on the
// thread count, so neither does the summation order.
constexpr int kRowPanel = 64;

void gemm_panel(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
                const double* b, int ldb, double beta, double* c, int ldc) {
    Eigen::Map<RowMajor, 0, Stride> cm(c, m, n, Stride(ldc));
    if (k == 0) {
        if (beta == 0.0)
            cm.setZero();
        else
            cm *= beta;
        return;
    }
    with_view(trans_a, a, m, k, lda, [&](const auto& am) {
        with_view(trans_b, b, k, n, ldb, [&](const auto& bm) {
            if (beta == 0.0) {
                cm.noalias() = alpha * (am * bm);
            } else {
                if (beta != 1.0) cm *= beta;
                cm.noalias() += alpha * (am * bm);
            }
        });
    });
}

// Per-thread scratch that only grows, so the large im2col buffers are not
// reallocated (and page-faulted) on every call. Contents are uninitialized.
double* scratch(int slot, std::size_t n) {
    thread_local std::vector<double> buffers[3];
    std::vector<double>& b = buffers[slot];
    if (b.size() < n) b.resize(n);
    return b.data();
}

// Output columns [lo, hi) whose input column ox*stride - pad + kx is in bounds.
std::pair<int, int> valid_range(const ConvGeom& g, int kx, int wo) {
    const int off = kx - g.pad;
    int lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
    int hi = g.width - 1 - off < 0 ? 0 : (g.width - 1 - off) / g.stride + 1;
    lo = std::min(lo, wo);
    hi = std::clamp(hi, lo, wo);
    return {lo, hi};
}

// cols rows have stride ld (>= ho*wo) so several samples can share one buffer.
void im2col(const ConvGeom& g, const double* x, double* cols, long ld) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int kk = g.kernel;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        const double* plane = x + static_cast<long>(ci) * g.height * g.width;
        for (int ky = 0; ky < kk; ++ky) {
            for (int kx = 0; kx < kk; ++kx) {
                double* row = cols + (static_cast<long>(ci * kk + ky) * kk + kx) * ld;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    double* out = row + oy * wo;
                    if (iy < 0 || iy >= g.height) {
                        std::fill(out, out + wo, 0.0);
                        continue;
                    }
                    const double* in = plane + iy * g.width;
                    const auto [lo, hi] = valid_range(g, kx, wo);
                    std::fill(out, out + lo, 0.0);
                    std::fill(out + hi, out + wo, 0.0);
                    const int x0 = lo * g.stride - g.pad + kx;
                    if (g.stride == 1) {
                        std::copy(in + x0, in + x0 + (hi - lo), out + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox) out[ox] = in[x0 + (ox - lo) * g.stride];
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeom& g, const double* cols, long ld, double* dx) {
    const int ho = g.out_height();
    const int wo = g.out_width();
    const int kk = g.kernel;
    for (int ci = 0; ci < g.in_channels; ++ci) {
        double* plane = dx + static_cast<long>(ci) * g.height * g.width;
        for (int ky = 0; ky < kk; ++ky) {
            for (int kx = 0; kx < kk; ++kx) {
                const double* row = cols + (static_cast<long>(ci * kk + ky) * kk + kx) * ld;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.height) continue;
                    double* out = plane + iy * g.width;
                    const double* in = row + oy * wo;
                    const auto [lo, hi] = valid_range(g, kx, wo);
                    const int x0 = lo * g.stride - g.pad + kx;
                    if (g.stride == 1) {
                        for (int ox = lo; ox < hi; ++ox) out[x0 + ox - lo] += in[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox) out[x0 + (ox - lo) * g.stride] += in[ox];
                    }
                }
            }
        }
    }
}


}  // namespace

int max_threads() { return omp_get_max_threads(); }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc) {
    if (m <= 0 || n <= 0) return;
    const long work = static_cast<long>(m) * n * k;
    const int panels = (m + kRowPanel - 1) / kRowPanel;
    if (panels == 1 || !want_parallel(work)) {
        for (int p = 0; p < panels; ++p) {
            const int r0 = p * kRowPanel, rows = std::min(kRowPanel, m - r0);
            const double* ap = trans_a ? a + r0 : a + static_cast<long>(r0) * lda;
            gemm_panel(trans_a, trans_b, rows, n, k, alpha, ap, lda, b, ldb, beta, c + static_cast<long>(r0) * ldc, ldc);
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (int p = 0; p < panels; ++p) {
        const int r0 = p * kRowPanel, rows = std::min(kRowPanel, m - r0);
        const double* ap = trans_a ? a + r0 : a + static_cast<long>(r0) * lda;
        gemm_panel(trans_a, trans_b, rows, n, k, alpha, ap, lda, b, ldb, beta, c + static_cast<long>(r0) * ldc, ldc);
    }
}

// The convolutions lower the whole batch to one GEMM over [patch, N*HW]
// columns; larger products run much closer to peak than per-sample ones.

void conv2d_forward(const ConvGeom& g, const double* x, const double* w, const double* bias, double* y) {
    const long hw = static_cast<long>(g.out_height()) * g.out_width();
    const long cols_n = g.batch * hw;
    const int patch = g.in_channels * g.kernel * g.kernel;
    const long in_size = static_cast<long>(g.in_channels) * g.height * g.width;
    const long out_size = g.out_channels * hw;
    double* cols = scratch(0, static_cast<std::size_t>(patch) * cols_n);
#pragma omp parallel for schedule(static) if (want_parallel(cols_n * patch))
    for (int nb = 0; nb < g.batch; ++nb) im2col(g, x + nb * in_size, cols + nb * hw, cols_n);
    double* out = scratch(1, static_cast<std::size_t>(g.out_channels) * cols_n);
    gemm(false, false, g.out_channels, static_cast<int>(cols_n), patch, 1.0, w, patch, cols,
         static_cast<int>(cols_n), 0.0, out, static_cast<int>(cols_n));
#pragma omp parallel for schedule(static) if (want_parallel(cols_n * g.out_channels))
    for (int nb = 0; nb < g.batch; ++nb)
        for (int co = 0; co < g.out_channels; ++co) {
            const double* src = out + co * cols_n + nb * hw;
            double* dst = y + nb * out_size + co * hw;
            const double bv = bias ? bias[co] : 0.0;
            for (long j = 0; j < hw; ++j) dst[j] = src[j] + bv;
        }
}

namespace {

// dy [N, Co, HW] -> [Co, N*HW]
const double* gather_output_grad(const ConvGeom& g, const double* dy, long hw) {
    const long cols_n = g.batch * hw;
    double* d = scratch(2, static_cast<std::size_t>(g.out_channels) * cols_n);
    for (int nb = 0; nb < g.batch; ++nb)
        for (int co = 0; co < g.out_channels; ++co)
            std::copy_n(dy + (static_cast<long>(nb) * g.out_channels + co) * hw, hw, d + co * cols_n + nb * hw);
    return d;
}

}  // namespace

void conv2d_backward_input(const ConvGeom& g, const double* dy, const double* w, double* dx) {
    const long hw = static_cast<long>(g.out_height()) * g.out_width();
    const long cols_n = g.batch * hw;
    const int patch = g.in_channels * g.kernel * g.kernel;
    const long in_size = static_cast<long>(g.in_channels) * g.height * g.width;
    const double* d = gather_output_grad(g, dy, hw);
    double* cols = scratch(0, static_cast<std::size_t>(patch) * cols_n);
    gemm(true, false, patch, static_cast<int>(cols_n), g.out_channels, 1.0, w, patch, d,
         static_cast<int>(cols_n), 0.0, cols, static_cast<int>(cols_n));
#pragma omp parallel for schedule(static) if (want_parallel(cols_n * patch))
    for (int nb = 0; nb < g.batch; ++nb) col2im_add(g, cols + nb * hw, cols_n, dx + nb * in_size);
}

void conv2d_backward_weight(const ConvGeom& g, const double* x, const double* dy, double* dw, double* dbias) {
    const long hw = static_cast<long>(g.out_height()) * g.out_width();
    const long cols_n = g.batch * hw;
    const int patch = g.in_channels * g.kernel * g.kernel;
    const long in_size = static_cast<long>(g.in_channels) * g.height * g.width;
    double* cols = scratch(0, static_cast<std::size_t>(patch) * cols_n);
#pragma omp parallel for schedule(static) if (want_parallel(cols_n * patch))
    for (int nb = 0; nb < g.batch; ++nb) im2col(g, x + nb * in_size, cols + nb * hw, cols_n);
    const double* d = gather_output_grad(g, dy, hw);
    gemm(false, true, g.out_channels, patch, static_cast<int>(cols_n), 1.0, d, static_cast<int>(cols_n),
         cols, static_cast<int>(cols_n), 1.0, dw, patch);
    if (dbias)
        for (int co = 0; co < g.out_channels; ++co) {
            const double* row = d + co * cols_n;
            double s = 0.0;
            for (long j = 0; j < cols_n; ++j) s += row[j];
            dbias[co] += s;
        }
}

void bilinear_warp(int channels, int height, int width, const double* src, const double* flow, double* out) {
    const long plane = static_cast<long>(height) * width;
#pragma omp parallel for schedule(static) if (want_parallel(plane * channels * 8))
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const long p = static_cast<long>(y) * width + x;
            double sx = std::clamp(x + flow[p], 0.0, static_cast<double>(width - 1));
            double sy = std::clamp(y + flow[plane + p], 0.0, static_cast<double>(height - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, width - 1);
            const int y1 = std::min(y0 + 1, height - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < channels; ++c) {
                const double* s = src + c * plane;
                const double top = s[y0 * width + x0] * (1.0 - fx) + s[y0 * width + x1] * fx;
                const double bot = s[y1 * width + x0] * (1.0 - fx) + s[y1 * width + x1] * fx;
                out[c * plane + p] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
}

void gram_matrix(int channels, int hw, const double* features, double* gram) {
    gemm(false, true, channels, channels, hw, 1.0 / (static_cast<double>(channels) * hw), features, hw, features, hw,
         0.0, gram, channels);
}

}  // namespace hicast::kernels
