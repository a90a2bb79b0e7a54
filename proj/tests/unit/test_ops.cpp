// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"
#include "hicast/errors.hpp"
#include "hicast/ops.hpp"
#include "hicast/rng.hpp"

using namespace hicast;
using ag::Var;
using testing::check_gradient;

namespace {

Tensor rnd(const Shape& s, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    return rng.normal_tensor(s, scale);
}

// Contract with a fixed random tensor so every output element matters.
Var weigh(const Var& y, std::uint64_t seed = 99) {
    Var w(rnd(y.shape(), seed), false);
    return ops::sum(ops::mul(y, w));
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("element-wise op gradients") {
    const Tensor a = rnd({2, 3, 4}, 1);
    const Tensor b = rnd({2, 3, 4}, 2);
    auto run = [&](testing::ScalarFn f) { return check_gradient(f, {a, b}, {0, 1}).rel_error; };
    CHECK(run([](auto& v) { return weigh(ops::add(v[0], v[1])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::sub(v[0], v[1])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::mul(v[0], v[1])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::silu(v[0])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::sigmoid(v[0])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::log_sigmoid(v[1])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::square(v[0])); }) < kTol);
    CHECK(run([](auto& v) { return ops::rms(v[0]); }) < kTol);
    CHECK(run([](auto& v) { return ops::mean_square(ops::sub(v[0], v[1])); }) < kTol);
    CHECK(run([](auto& v) { return weigh(ops::sqrt_eps(ops::square(v[0]), 0.1)); }) < kTol);
    // Random normals stay clear of the kinks at +-0.7 by more than the FD step.
    CHECK(run([](auto& v) { return weigh(ops::clamp(v[0], -0.7, 0.7)); }) < kTol);
    const Tensor c = ops::clamp(Var(a), -0.7, 0.7).value();
    CHECK(c.max_abs() <= 0.7);
}

TEST_CASE("broadcast op gradients") {
    const Tensor x = rnd({2, 3, 4, 5}, 3);
    const Tensor c = rnd({3}, 4);
    const Tensor nc = rnd({2, 3}, 5);
    CHECK(check_gradient([](auto& v) { return weigh(ops::add_channel_bias(v[0], v[1])); }, {x, c}, {0, 1}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::add_per_sample_channel(v[0], v[1])); }, {x, nc}, {0, 1}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::mul_per_sample_channel(v[0], v[1])); }, {x, nc}, {0, 1}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::scale_per_sample(v[0], {0.3, -2.0})); }, {x}, {0}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::broadcast_map(v[0], 2, 3, 2)); }, {c}, {0}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::broadcast_rows(v[0], 4)); }, {c}, {0}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::mul_scalar_var(v[0], v[1])); }, {x, Tensor({1}, {0.7})}, {0, 1}).rel_error < kTol);
}

TEST_CASE("layer op gradients") {
    SUBCASE("conv2d") {
        const Tensor x = rnd({2, 3, 6, 6}, 6);
        const Tensor w = rnd({4, 3, 3, 3}, 7);
        const Tensor b = rnd({4}, 8);
        for (int stride : {1, 2}) {
            auto f = [stride](auto& v) { return weigh(ops::conv2d(v[0], v[1], v[2], stride, 1)); };
            CHECK(check_gradient(f, {x, w, b}, {0, 1, 2}).rel_error < kTol);
        }
    }
    SUBCASE("linear") {
        auto f = [](auto& v) { return weigh(ops::linear(v[0], v[1], v[2])); };
        CHECK(check_gradient(f, {rnd({3, 5}, 1), rnd({4, 5}, 2), rnd({4}, 3)}, {0, 1, 2}).rel_error < kTol);
    }
    SUBCASE("group norm") {
        auto f = [](auto& v) { return weigh(ops::group_norm(v[0], 2, v[1], v[2])); };
        CHECK(check_gradient(f, {rnd({2, 4, 3, 3}, 1), rnd({4}, 2), rnd({4}, 3)}, {0, 1, 2}).rel_error < 1e-5);
    }
    SUBCASE("pooling and resampling") {
        const Tensor x = rnd({2, 2, 4, 4}, 9);
        CHECK(check_gradient([](auto& v) { return weigh(ops::avg_pool2(v[0])); }, {x}, {0}).rel_error < kTol);
        CHECK(check_gradient([](auto& v) { return weigh(ops::upsample_nearest2(v[0])); }, {x}, {0}).rel_error < kTol);
        CHECK(check_gradient([](auto& v) { return weigh(ops::pixel_unshuffle(v[0], 2)); }, {x}, {0}).rel_error < kTol);
        CHECK(check_gradient([](auto& v) { return weigh(ops::pixel_shuffle(v[0], 2)); }, {rnd({2, 8, 2, 3}, 4)}, {0}).rel_error < kTol);
        CHECK(bit_equal(ops::pixel_shuffle(ops::pixel_unshuffle(Var(x), 2), 2).value(), x));
        CHECK(ops::pixel_unshuffle(Var(x), 2).value().at({1, 5, 1, 0}) == x.at({1, 1, 2, 1}));
        CHECK(check_gradient([](auto& v) { return weigh(ops::global_avg_pool(v[0])); }, {x}, {0}).rel_error < kTol);
        CHECK(check_gradient([](auto& v) { return weigh(ops::channel_variance(v[0])); }, {x}, {0}).rel_error < kTol);
        auto cw = [](auto& v) { return weigh(ops::crop_windows(v[0], {{1, 0, 1}, {0, 2, 2}, {1, 0, 1}}, 2)); };
        CHECK(check_gradient(cw, {x}, {0}).rel_error < kTol);
        CHECK(ops::crop_windows(Var(x), {{1, 2, 1}}, 2).value().at({0, 1, 1, 0}) == x.at({1, 1, 3, 1}));
        CHECK_THROWS_AS(ops::crop_windows(Var(x), {{0, 3, 0}}, 2), ArgumentError);
        auto pa = [](auto& v) { return weigh(ops::patch_average(v[0], {{0, 0}, {2, 1}}, 2)); };
        CHECK(check_gradient(pa, {x}, {0}).rel_error < kTol);
    }
    SUBCASE("normalize rows") {
        CHECK(check_gradient([](auto& v) { return weigh(ops::l2_normalize_rows(v[0])); }, {rnd({3, 5}, 1)}, {0}).rel_error < kTol);
    }
}

TEST_CASE("shape op gradients") {
    const Tensor x = rnd({2, 3, 4}, 10);
    CHECK(check_gradient([](auto& v) { return weigh(ops::permute(v[0], {2, 0, 1})); }, {x}, {0}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::reshape(v[0], {6, 4})); }, {x}, {0}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::concat({v[0], v[1]}, 1)); }, {x, rnd({2, 2, 4}, 3)}, {0, 1}).rel_error < kTol);
    CHECK(check_gradient([](auto& v) { return weigh(ops::gather_leading(v[0], {1, 0, 1})); }, {x}, {0}).rel_error < kTol);
}

TEST_CASE("attention building block gradients") {
    for (bool tb : {false, true}) {
        const Tensor a = rnd({2, 3, 4}, 1);
        const Tensor b = tb ? rnd({2, 5, 4}, 2) : rnd({2, 4, 5}, 2);
        auto f = [tb](auto& v) { return weigh(ops::bmm(v[0], v[1], tb)); };
        CHECK(check_gradient(f, {a, b}, {0, 1}).rel_error < kTol);
    }
    CHECK(check_gradient([](auto& v) { return weigh(ops::softmax_last(v[0])); }, {rnd({2, 3, 4}, 3)}, {0}).rel_error < kTol);
    auto mb = [](auto& v) { return weigh(ops::add_matrix_bias(v[0], v[1])); };
    CHECK(check_gradient(mb, {rnd({2, 3, 4}, 4), rnd({3, 4}, 5)}, {0, 1}).rel_error < kTol);
    auto ce = [](auto& v) { return ops::cross_entropy(v[0], {0, 2, 1}); };
    CHECK(check_gradient(ce, {rnd({3, 4}, 6)}, {0}).rel_error < kTol);
}

TEST_CASE("temporal conv gradients and identity behaviour") {
    const Tensor x = rnd({6, 2, 3, 3}, 1);  // 2 clips x 3 frames
    auto f = [](auto& v) { return weigh(ops::temporal_conv(v[0], 3, v[1], v[2])); };
    CHECK(check_gradient(f, {x, rnd({4, 2, 3}, 2), rnd({4}, 3)}, {0, 1, 2}).rel_error < kTol);

    // Center tap only -> per-frame 1x1 mixing, no leakage across clips.
    Tensor w({2, 2, 3});
    w.at({0, 0, 1}) = 1.0;
    w.at({1, 1, 1}) = 1.0;
    Var y = ops::temporal_conv(Var(x), 3, Var(w), Var(Tensor({2})));
    CHECK(max_abs_diff(y.value(), x) == 0.0);

    // Previous-frame tap with replicated edges: frame 0 sees itself.
    Tensor prev({2, 2, 3});
    prev.at({0, 0, 0}) = 1.0;
    prev.at({1, 1, 0}) = 1.0;
    Tensor z = ops::temporal_conv(Var(x), 3, Var(prev), Var(Tensor({2}))).value();
    for (int c = 0; c < 2; ++c) {
        CHECK(bit_equal(slice_leading(z, c * 3, 1), slice_leading(x, c * 3, 1)));
        CHECK(bit_equal(slice_leading(z, c * 3 + 1, 1), slice_leading(x, c * 3, 1)));
        CHECK(bit_equal(slice_leading(z, c * 3 + 2, 1), slice_leading(x, c * 3 + 1, 1)));
    }
}

TEST_CASE("ops reject mismatched shapes") {
    Var a(Tensor({2, 3})), b(Tensor({3, 2}));
    CHECK_THROWS_AS(ops::add(a, b), ArgumentError);
    CHECK_THROWS_AS(ops::linear(a, Var(Tensor({4, 2})), Var(Tensor({4}))), ArgumentError);
    CHECK_THROWS_AS(ops::pixel_unshuffle(Var(Tensor({1, 1, 6, 6})), 4), ArgumentError);
}

TEST_CASE("no graph is built under NoGradGuard") {
    Var p(Tensor({2}, {1.0, 2.0}), true);
    {
        ag::NoGradGuard g;
        Var y = ops::square(p);
        CHECK_FALSE(y.requires_grad());
    }
    Var y = ops::sum(ops::square(p));
    ag::backward(y);
    CHECK(p.grad()[1] == doctest::Approx(4.0));
}
