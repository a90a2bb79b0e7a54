// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "grad_check.hpp"
#include "hicast/codec.hpp"
#include "hicast/errors.hpp"
#include "hicast/losses.hpp"
#include "hicast/optim.hpp"
#include "hicast/synth.hpp"

using namespace hicast;
using testing::check_gradient;

namespace {

constexpr double kFdTol = 1e-3;

Tensor rnd(const Shape& s, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    return rng.normal_tensor(s, scale);
}

FeatureNet frozen_net() {
    FeatureNet n(FeatureNetConfig{}, 3);
    n.freeze();
    return n;
}

void set_all(ParamSet& ps, double v) {
    for (const auto& [name, p] : ps.items()) p.node()->value.fill(v);
}

Tensor unit_rows(const Tensor& t) {
    Tensor out = t;
    const int d = t.dim(-1);
    for (std::size_t r = 0; r < t.numel() / d; ++r) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += t[r * d + j] * t[r * d + j];
        for (int j = 0; j < d; ++j) out[r * d + j] = t[r * d + j] / std::sqrt(s);
    }
    return out;
}

}  // namespace

TEST_CASE("content loss") {
    LossWeights w;
    Var zeros(Tensor({1, 4, 8, 8})), ones(Tensor({1, 4, 8, 8}, 1.0));
    CHECK(content_loss(zeros, ones, w).value()[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(content_loss(ones, ones, w).value()[0] == 0.0);
    w.squared = true;
    CHECK(content_loss(zeros, Var(Tensor({1, 4, 8, 8}, 2.0)), w).value()[0] == doctest::Approx(8.0));
    auto f = [](auto& v) { return content_loss(v[0], v[1], LossWeights{}); };
    CHECK(check_gradient(f, {rnd({1, 4, 8, 8}, 1), rnd({1, 4, 8, 8}, 2)}, {0, 1}).rel_error < kFdTol);
    CHECK_THROWS_AS(content_loss(zeros, Var(Tensor({1, 4, 4, 4})), w), ArgumentError);
}

TEST_CASE("style loss: zero on identical images, symmetric, differentiable through decode") {
    const FeatureNet net = frozen_net();
    const Var a(gen_style_image(1, 32).pixels.reshaped({1, 3, 32, 32}));
    const Var b(gen_style_image(2, 32).pixels.reshaped({1, 3, 32, 32}));
    const LossWeights w;
    CHECK(style_loss(a, a, net, w).value()[0] == 0.0);
    CHECK(style_loss(a, b, net, w).value()[0] == style_loss(b, a, net, w).value()[0]);
    CHECK(style_loss(a, b, net, w).value()[0] > 0.0);

    Codec codec(CodecConfig{}, 4);
    auto f = [&](auto& v) { return style_loss(codec.decode_batch(v[0]), b, net, w); };
    CHECK(check_gradient(f, {rnd({1, 4, 8, 8}, 5)}, {0}, 1e-4, 120).rel_error < kFdTol);
}

TEST_CASE("gan losses: constant discriminators") {
    const LossWeights w;
    Discriminators d(DiscriminatorConfig{}, 1);
    set_all(d.params(), 0.0);  // logits 0 -> D = 0.5 everywhere
    Rng rng(2);
    const Var out(rnd({2, 3, 32, 32}, 3)), style(rnd({2, 3, 32, 32}, 4));
    const CropPlan crops = plan_crops(2, 32, 32, 4, rng);
    CHECK(crops.size == 8);
    GanTerms g = gan_losses(out, style, d, crops, w);
    CHECK(g.patch_g.value()[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(g.g_loss.value()[0] == doctest::Approx(1.0).epsilon(1e-12));  // ln .5 + 1 - ln .5
    CHECK(g.d_loss.value()[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    // D -> 1 on everything: the real term of the discriminator loss vanishes.
    d.params().get("disc/image.head.bias").node()->value.fill(40.0);
    g = gan_losses(out, style, d, crops, w);
    CHECK(g.d_loss.value()[0] == doctest::Approx(40.0).epsilon(1e-9));  // only -log(1 - D(out)) remains

    CHECK_THROWS_AS(plan_crops(1, 3, 3, 4, rng), ArgumentError);
}

TEST_CASE("gan generator terms match finite differences") {
    const LossWeights w;
    const Discriminators d(DiscriminatorConfig{}, 5);
    Rng rng(1);
    const CropPlan crops = plan_crops(2, 16, 16, 4, rng);
    const Tensor style = rnd({2, 3, 16, 16}, 7);
    auto g = [&](auto& v) { return gan_losses(v[0], Var(style), d, crops, w).g_loss; };
    auto pg = [&](auto& v) { return gan_losses(v[0], Var(style), d, crops, w).patch_g; };
    CHECK(check_gradient(g, {rnd({2, 3, 16, 16}, 8)}, {0}).rel_error < kFdTol);
    CHECK(check_gradient(pg, {rnd({2, 3, 16, 16}, 9)}, {0}).rel_error < kFdTol);
}

TEST_CASE("discriminator loss falls on a separable pair") {
    Discriminators d(DiscriminatorConfig{}, 2);
    Adam opt(d.params().trainable(), AdamConfig{1e-3});
    const Var fake(Tensor({2, 3, 32, 32}, 0.0));
    const Var real(concat_leading({gen_style_image(1, 32).pixels.reshaped({1, 3, 32, 32}),
                                   gen_style_image(2, 32).pixels.reshaped({1, 3, 32, 32})}));
    Rng rng(3);
    double first = 0, last = 0;
    for (int step = 0; step < 200; ++step) {
        const CropPlan crops = plan_crops(2, 32, 32, 4, rng);
        GanTerms g = gan_losses(fake, real, d, crops, LossWeights{});
        const double v = g.d_loss.value()[0] + g.patch_d.value()[0];
        if (step < 10) first += v;
        if (step >= 190) last += v;
        ag::backward(ops::add(g.d_loss, g.patch_d));
        opt.step();
    }
    CHECK(last < 0.5 * first);
}

TEST_CASE("patch contrastive closed forms") {
    Tensor u({1, 6});
    u[2] = 1.0;
    Tensor negs({1, 16, 6});
    for (int j = 0; j < 16; ++j) negs[j * 6 + 2] = 1.0;
    const double uniform = patch_contrastive(Var(u), Var(u), Var(negs), 0.07).value()[0];
    CHECK(std::abs(uniform - std::log(17.0)) < 1e-6);

    const Tensor v = unit_rows(rnd({3, 6}, 1));
    const Tensor n = unit_rows(rnd({3, 16, 6}, 2));
    Tensor pos_lo = unit_rows(rnd({3, 6}, 3));
    const double lo = patch_contrastive(Var(v), Var(pos_lo), Var(n), 0.07).value()[0];
    const double hi = patch_contrastive(Var(v), Var(v), Var(n), 0.07).value()[0];  // v.v+ = 1
    CHECK(hi < lo);

    // Permuting the negatives leaves the value bit-identical.
    std::vector<int> perm(16);
    for (int i = 0; i < 16; ++i) perm[i] = (i * 7 + 3) % 16;
    Tensor np = n;
    for (int m = 0; m < 3; ++m)
        for (int j = 0; j < 16; ++j)
            for (int k = 0; k < 6; ++k) np[(m * 16 + j) * 6 + k] = n[(m * 16 + perm[j]) * 6 + k];
    CHECK(patch_contrastive(Var(v), Var(pos_lo), Var(np), 0.07).value()[0] == lo);

    auto f = [&](auto& x) { return patch_contrastive(x[0], Var(pos_lo), Var(n), 0.07); };
    CHECK(check_gradient(f, {v}, {0}).rel_error < kFdTol);
}

TEST_CASE("patch layout") {
    const PatchLayout l = make_patch_layout(32, 32, PatchGeometry{}, 1);
    CHECK(l.anchors.size() == 16);
    for (std::size_t a = 0; a < l.anchors.size(); ++a) {
        REQUIRE(l.negatives[a].size() == 16);
        const auto [ay, ax] = l.anchors[a];
        for (int j = 0; j < 8; ++j) {
            const auto [y, x] = l.negatives[a][j];
            CHECK(std::max(std::abs(y - ay), std::abs(x - ax)) == 8);
        }
        for (int j = 8; j < 16; ++j) {
            const auto [y, x] = l.negatives[a][j];
            CHECK(std::max(std::abs(y - ay), std::abs(x - ax)) >= 16);
            CHECK((y >= 0 && x >= 0 && y <= 24 && x <= 24));
        }
    }
    const PatchLayout again = make_patch_layout(32, 32, PatchGeometry{}, 1);
    CHECK(again.negatives == l.negatives);
}

TEST_CASE("harmonious loss") {
    const FeatureNet net = frozen_net();
    const PatchGeometry g;
    const PatchLayout layout = make_patch_layout(32, 32, g, 4);
    const Tensor eps = rnd({2, 4, 8, 8}, 1), eps_i = rnd({2, 4, 8, 8}, 2);
    const Tensor frames = concat_leading({gen_content_image(1, 32).pixels.reshaped({1, 3, 32, 32}),
                                          gen_content_image(2, 32).pixels.reshaped({1, 3, 32, 32})});
    LossWeights w;

    SUBCASE("term isolation") {
        w.lambda_hl = 0.0;
        const HarmoniousTerms h = harmonious_loss(Var(eps_i), eps, eps_i, Var(frames), frames, net, layout, g, w);
        CHECK(h.global_image.value()[0] == 0.0);
        const double expect = 0.01 * content_loss(Var(eps), Var(eps_i), LossWeights{1.0}).value()[0];
        CHECK(h.total.value()[0] == doctest::Approx(expect).epsilon(1e-14));
    }
    SUBCASE("brute-force local part") {
        const HarmoniousTerms h = harmonious_loss(Var(eps), eps, eps, Var(frames), frames, net, layout, g, w);
        CHECK(h.global_noise.value()[0] == 0.0);
        CHECK(h.global_image.value()[0] == 0.0);
        const Tensor f0 = net.features(Var(frames)).front().value();  // [2, 8, 32, 32]
        const int c = f0.dim(1);
        auto feat = [&](int n, std::pair<int, int> corner) {
            std::vector<double> v(c);
            double s2 = 0;
            for (int ch = 0; ch < c; ++ch) {
                double s = 0;
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) s += f0.at({n, ch, corner.first + y, corner.second + x});
                v[ch] = s / 64;
                s2 += v[ch] * v[ch];
            }
            for (double& e : v) e /= std::sqrt(s2);
            return v;
        };
        auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
            double s = 0;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
            return s;
        };
        double total = 0;
        for (int n = 0; n < 2; ++n)
            for (std::size_t a = 0; a < layout.anchors.size(); ++a) {
                const auto v = feat(n, layout.anchors[a]);
                const double sp = std::exp(dot(v, v) / 0.07);
                double den = sp;
                for (const auto& corner : layout.negatives[a]) den += std::exp(dot(v, feat(n, corner)) / 0.07);
                total += -std::log(sp / den);
            }
        CHECK(h.local.value()[0] == doctest::Approx(total).epsilon(1e-10));
    }
    SUBCASE("finite differences") {
        Rng rng(1);
        const Tensor out = frames + rnd(frames.shape(), 5, 0.1);
        auto by_eps = [&](auto& v) {
            return harmonious_loss(v[0], eps, eps_i, Var(out), frames, net, layout, g, w).total;
        };
        CHECK(check_gradient(by_eps, {rnd({2, 4, 8, 8}, 3)}, {0}).rel_error < kFdTol);
        auto by_frames = [&](auto& v) {
            return harmonious_loss(Var(eps), eps, eps_i, v[0], frames, net, layout, g, w).total;
        };
        CHECK(check_gradient(by_frames, {out}, {0}, 1e-4, 200).rel_error < kFdTol);
    }
    CHECK_THROWS_AS(harmonious_loss(Var(eps), eps, eps_i, Var(slice_leading(frames, 0, 1)), frames, net, layout, g, w),
                    ArgumentError);
}
