// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels against the serial reference versions. Each benchmark pair
// uses the same shapes; arg 0 selects the implementation (0 = parallel,
// 1 = reference).

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hicast/kernels.hpp"

namespace k = hicast::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (double& x : v) x = d(gen);
    return v;
}

void label(benchmark::State& st) { st.SetLabel(st.range(0) ? "reference" : "omp"); }

void BM_gemm(benchmark::State& st) {
    const int n = static_cast<int>(st.range(1));
    const auto a = random_vec(std::size_t(n) * n, 1), b = random_vec(std::size_t(n) * n, 2);
    std::vector<double> c(std::size_t(n) * n);
    for (auto _ : st) {
        if (st.range(0)) k::reference::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0, c.data(), n);
        else k::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0, c.data(), n);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * 2 * std::int64_t(n) * n * n);
    label(st);
}

k::ConvGeom conv_geom(int hw, int ch) {
    k::ConvGeom g;
    g.batch = 8;
    g.in_channels = ch;
    g.out_channels = ch;
    g.height = g.width = hw;
    g.kernel = 3;
    g.pad = 1;
    return g;
}

void BM_conv_forward(benchmark::State& st) {
    const k::ConvGeom g = conv_geom(static_cast<int>(st.range(1)), 32);
    const auto x = random_vec(std::size_t(g.batch) * g.in_channels * g.height * g.width, 3);
    const auto w = random_vec(std::size_t(g.out_channels) * g.in_channels * 9, 4);
    const auto bias = random_vec(g.out_channels, 5);
    std::vector<double> y(std::size_t(g.batch) * g.out_channels * g.out_height() * g.out_width());
    for (auto _ : st) {
        if (st.range(0)) k::reference::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
        else k::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    label(st);
}

void BM_conv_backward(benchmark::State& st) {
    const k::ConvGeom g = conv_geom(static_cast<int>(st.range(1)), 32);
    const auto x = random_vec(std::size_t(g.batch) * g.in_channels * g.height * g.width, 6);
    const auto w = random_vec(std::size_t(g.out_channels) * g.in_channels * 9, 7);
    const auto dy = random_vec(std::size_t(g.batch) * g.out_channels * g.out_height() * g.out_width(), 8);
    std::vector<double> dx(x.size()), dw(w.size()), db(g.out_channels);
    for (auto _ : st) {
        if (st.range(0)) {
            k::reference::conv2d_backward_input(g, dy.data(), w.data(), dx.data());
            k::reference::conv2d_backward_weight(g, x.data(), dy.data(), dw.data(), db.data());
        } else {
            k::conv2d_backward_input(g, dy.data(), w.data(), dx.data());
            k::conv2d_backward_weight(g, x.data(), dy.data(), dw.data(), db.data());
        }
        benchmark::DoNotOptimize(dx.data());
        benchmark::DoNotOptimize(dw.data());
    }
    label(st);
}

void BM_warp(benchmark::State& st) {
    const int hw = static_cast<int>(st.range(1));
    const auto src = random_vec(std::size_t(3) * hw * hw, 9);
    auto flow = random_vec(std::size_t(2) * hw * hw, 10);
    for (double& f : flow) f *= 2.0;
    std::vector<double> out(src.size());
    for (auto _ : st) {
        if (st.range(0)) k::reference::bilinear_warp(3, hw, hw, src.data(), flow.data(), out.data());
        else k::bilinear_warp(3, hw, hw, src.data(), flow.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
    label(st);
}

void BM_gram(benchmark::State& st) {
    const int c = static_cast<int>(st.range(1)), hw = 32 * 32;
    const auto f = random_vec(std::size_t(c) * hw, 11);
    std::vector<double> g(std::size_t(c) * c);
    for (auto _ : st) {
        if (st.range(0)) k::reference::gram_matrix(c, hw, f.data(), g.data());
        else k::gram_matrix(c, hw, f.data(), g.data());
        benchmark::DoNotOptimize(g.data());
    }
    label(st);
}

}  // namespace

BENCHMARK(BM_gemm)->ArgsProduct({{0, 1}, {64, 256}});
BENCHMARK(BM_conv_forward)->ArgsProduct({{0, 1}, {8, 32}});
BENCHMARK(BM_conv_backward)->ArgsProduct({{0, 1}, {8, 32}});
BENCHMARK(BM_warp)->ArgsProduct({{0, 1}, {32, 128}});
BENCHMARK(BM_gram)->ArgsProduct({{0, 1}, {16, 64}});

BENCHMARK_MAIN();
