// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <tuple>
#include <vector>

#include "doctest.h"
#include "hicast/kernels.hpp"
#include "hicast/rng.hpp"

using namespace hicast;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("gemm matches the serial reference for every transpose combination") {
    Rng rng(11);
    for (bool ta : {false, true})
        for (bool tb : {false, true})
            for (auto [m, n, k] : {std::tuple{1, 1, 1}, std::tuple{5, 7, 3}, std::tuple{17, 64, 33}, std::tuple{64, 9, 128}}) {
                auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
                auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
                auto c1 = random_vec(static_cast<std::size_t>(m) * n, rng);
                auto c2 = c1;
                const int lda = ta ? m : k;
                const int ldb = tb ? k : n;
                kernels::gemm(ta, tb, m, n, k, 0.7, a.data(), lda, b.data(), ldb, 0.3, c1.data(), n);
                kernels::reference::gemm(ta, tb, m, n, k, 0.7, a.data(), lda, b.data(), ldb, 0.3, c2.data(), n);
                CHECK(max_diff(c1, c2) < 1e-10);
            }
}

TEST_CASE("conv2d kernels match the direct reference") {
    Rng rng(5);
    const std::vector<kernels::ConvGeom> geoms = {
        {2, 3, 8, 8, 4, 3, 1, 1},
        {3, 5, 9, 7, 2, 3, 2, 1},
        {2, 6, 4, 4, 6, 1, 1, 0},
        {1, 2, 16, 16, 3, 3, 2, 1},
    };
    for (const auto& g : geoms) {
        const std::size_t xs = static_cast<std::size_t>(g.batch) * g.in_channels * g.height * g.width;
        const std::size_t ws = static_cast<std::size_t>(g.out_channels) * g.in_channels * g.kernel * g.kernel;
        const std::size_t ys = static_cast<std::size_t>(g.batch) * g.out_channels * g.out_height() * g.out_width();
        auto x = random_vec(xs, rng);
        auto w = random_vec(ws, rng);
        auto b = random_vec(static_cast<std::size_t>(g.out_channels), rng);
        std::vector<double> y1(ys), y2(ys);
        kernels::conv2d_forward(g, x.data(), w.data(), b.data(), y1.data());
        kernels::reference::conv2d_forward(g, x.data(), w.data(), b.data(), y2.data());
        CHECK(max_diff(y1, y2) < 1e-10);

        auto dy = random_vec(ys, rng);
        std::vector<double> dx1(xs, 0.5), dx2(xs, 0.5);
        kernels::conv2d_backward_input(g, dy.data(), w.data(), dx1.data());
        kernels::reference::conv2d_backward_input(g, dy.data(), w.data(), dx2.data());
        CHECK(max_diff(dx1, dx2) < 1e-10);

        std::vector<double> dw1(ws, 0.1), dw2(ws, 0.1), db1(g.out_channels, 0.0), db2(g.out_channels, 0.0);
        kernels::conv2d_backward_weight(g, x.data(), dy.data(), dw1.data(), db1.data());
        kernels::reference::conv2d_backward_weight(g, x.data(), dy.data(), dw2.data(), db2.data());
        CHECK(max_diff(dw1, dw2) < 1e-9);
        CHECK(max_diff(db1, db2) < 1e-10);
    }
}

TEST_CASE("bilinear warp matches the tent-weight reference") {
    Rng rng(9);
    const int c = 3, h = 10, w = 12;
    auto src = random_vec(static_cast<std::size_t>(c) * h * w, rng);
    std::vector<double> flow(2 * h * w);
    for (double& f : flow) f = rng.uniform(-3.0, 3.0);
    std::vector<double> o1(src.size()), o2(src.size());
    kernels::bilinear_warp(c, h, w, src.data(), flow.data(), o1.data());
    kernels::reference::bilinear_warp(c, h, w, src.data(), flow.data(), o2.data());
    CHECK(max_diff(o1, o2) < 1e-12);
}

TEST_CASE("zero flow warp is the identity") {
    Rng rng(2);
    auto src = random_vec(2 * 5 * 6, rng);
    std::vector<double> flow(2 * 5 * 6, 0.0), out(src.size());
    kernels::bilinear_warp(2, 5, 6, src.data(), flow.data(), out.data());
    CHECK(max_diff(src, out) == 0.0);
}

TEST_CASE("gram matrix matches reference and is symmetric") {
    Rng rng(4);
    const int c = 6, hw = 50;
    auto f = random_vec(static_cast<std::size_t>(c) * hw, rng);
    std::vector<double> g1(c * c), g2(c * c);
    kernels::gram_matrix(c, hw, f.data(), g1.data());
    kernels::reference::gram_matrix(c, hw, f.data(), g2.data());
    CHECK(max_diff(g1, g2) < 1e-12);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) CHECK(g1[i * c + j] == doctest::Approx(g1[j * c + i]).epsilon(1e-14));
}
