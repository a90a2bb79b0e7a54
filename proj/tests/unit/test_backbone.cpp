// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hicast/backbone.hpp"
#include "hicast/errors.hpp"

using namespace hicast;
namespace fs = std::filesystem;

namespace {

struct Inputs {
    Var z, content, emb;
};

Inputs make_inputs(int b, int hw, std::uint64_t seed, const BackboneConfig& cfg = {}) {
    Rng rng(seed);
    return {Var(rng.normal_tensor({b, cfg.latent_channels, hw, hw}, 1.0)),
            Var(rng.normal_tensor({b, cfg.content_channels, hw, hw}, 1.0)),
            Var(rng.normal_tensor({b, cfg.d_emb}, 1.0))};
}

// Perturb the parameters under a name prefix (zero-init layers become active).
void perturb(Backbone& v, double scale, const std::string& prefix = "unet/temporal/") {
    Rng rng(77);
    for (const auto& [name, p] : v.params().items())
        if (name.rfind(prefix, 0) == 0) {
            Tensor& t = p.node()->value;
            for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(t[i] + rng.normal() * scale);
        }
}

// Direct loop form of attention where each query row of frame f attends to
// the tokens of every frame in its clip.
Tensor st_attention_oracle(const Tensor& q, const Tensor& k, const Tensor& v, int frames) {
    const int bf = q.dim(0), t = q.dim(1), c = q.dim(2);
    Tensor out({bf, t, c});
    for (int n = 0; n < bf; ++n) {
        const int clip = n / frames;
        for (int i = 0; i < t; ++i) {
            std::vector<double> s;
            double mx = -1e300;
            for (int g = 0; g < frames; ++g)
                for (int j = 0; j < t; ++j) {
                    double d = 0;
                    for (int ch = 0; ch < c; ++ch) d += q.at({n, i, ch}) * k.at({clip * frames + g, j, ch});
                    s.push_back(d / std::sqrt(static_cast<double>(c)));
                    mx = std::max(mx, s.back());
                }
            double z = 0;
            for (double& e : s) z += (e = std::exp(e - mx));
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0;
                std::size_t idx = 0;
                for (int g = 0; g < frames; ++g)
                    for (int j = 0; j < t; ++j) acc += s[idx++] / z * v.at({clip * frames + g, j, ch});
                out.at({n, i, ch}) = acc;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("image-mode shapes and level shapes") {
    Backbone b(BackboneConfig{}, 1);
    auto in = make_inputs(2, 8, 3);
    Var eps = b.predict(in.z, in.content, in.emb);
    CHECK(eps.shape() == Shape{2, 4, 8, 8});
    CHECK(eps.value().all_finite());
    auto shapes = b.level_shapes(8, 8);
    REQUIRE(shapes.size() == 2);
    CHECK(shapes[0] == Shape{32, 8, 8});
    CHECK(shapes[1] == Shape{64, 4, 4});
    CHECK(b.temporal_parameter_names().empty());
}

TEST_CASE("backbone argument checks") {
    Backbone b(BackboneConfig{}, 1);
    auto in = make_inputs(2, 8, 3);
    CHECK_THROWS_AS(b.predict(in.z, Var(Tensor({2, 3, 4, 4})), in.emb), ArgumentError);
    CHECK_THROWS_AS(b.predict(in.z, in.content, Var(Tensor({2, 10}))), ArgumentError);
    auto odd = make_inputs(1, 7, 3);
    CHECK_THROWS_AS(b.predict(odd.z, odd.content, odd.emb), ArgumentError);
    CHECK_THROWS_AS(b.predict(in.z, in.content, in.emb, {Var(Tensor({2, 32, 8, 8}))}), ArgumentError);
    CHECK_THROWS_AS(b.predict_video(in.z, in.content, in.emb, 2), StateError);
    Tensor bad = in.z.value();
    bad[0] = std::nan("");
    CHECK_THROWS_AS(b.predict(Var(bad), in.content, in.emb), NumericError);
}

TEST_CASE("zero adapter pyramid is a no-op") {
    Backbone b(BackboneConfig{}, 2);
    auto in = make_inputs(2, 8, 4);
    AdapterPyramid zero{Var(Tensor({2, 32, 8, 8})), Var(Tensor({2, 64, 4, 4}))};
    CHECK(max_abs_diff(b.predict(in.z, in.content, in.emb).value(),
                       b.predict(in.z, in.content, in.emb, zero).value()) < 1e-6);
    Rng rng(1);
    AdapterPyramid some{Var(rng.normal_tensor({2, 32, 8, 8}, 1.0)), Var(Tensor({2, 64, 4, 4}))};
    CHECK(max_abs_diff(b.predict(in.z, in.content, in.emb).value(),
                       b.predict(in.z, in.content, in.emb, some).value()) > 1e-3);
}

TEST_CASE("inflation copies and freezes the spatial weights") {
    Backbone img(BackboneConfig{}, 3);
    Backbone vid = Backbone::inflate(img);
    CHECK(vid.temporal());
    const auto a = img.params().snapshot();
    const auto b = vid.params().snapshot();
    for (const auto& [name, t] : a) {
        REQUIRE(b.count(name));
        CHECK(bit_equal(t, b.at(name)));
    }
    const auto names = vid.temporal_parameter_names();
    CHECK(names.size() + a.size() == b.size());
    auto trainable = vid.params().trainable();
    CHECK(trainable.size() == names.size());
    for (const auto& [name, v] : trainable) CHECK(name.rfind("unet/temporal/", 0) == 0);
    CHECK_THROWS_AS(Backbone::inflate(vid), ArgumentError);
}

TEST_CASE("fresh inflated model matches the image model per frame") {
    Backbone img(BackboneConfig{}, 4);
    Backbone vid = Backbone::inflate(img);
    for (int frames : {1, 4}) {
        auto in = make_inputs(2 * frames, 8, 10 + frames);
        const Tensor per_frame = img.predict(in.z, in.content, in.emb).value();
        const Tensor video = vid.predict_video(in.z, in.content, in.emb, frames).value();
        CHECK(max_abs_diff(per_frame, video) < 1e-5);
    }
}

TEST_CASE("temporal layers mix frames once trained") {
    Backbone img(BackboneConfig{}, 5);
    Backbone vid = Backbone::inflate(img);
    perturb(vid, 0.05);
    auto in = make_inputs(4, 8, 6);
    const Tensor video = vid.predict_video(in.z, in.content, in.emb, 4).value();
    CHECK(max_abs_diff(video, img.predict(in.z, in.content, in.emb).value()) > 1e-4);

    // Changing frame 3 of the clip moves the output at frame 0.
    Tensor z2 = in.z.value();
    for (int i = 3 * 256; i < 4 * 256; ++i) z2[i] += 1.0;
    const Tensor moved = vid.predict_video(Var(z2), in.content, in.emb, 4).value();
    CHECK(max_abs_diff(slice_leading(moved, 0, 1), slice_leading(video, 0, 1)) > 1e-6);

    CHECK_THROWS_AS(vid.predict_video(in.z, in.content, in.emb, 3), ArgumentError);
    auto long_clip = make_inputs(9, 8, 6);
    CHECK_THROWS_AS(vid.predict_video(long_clip.z, long_clip.content, long_clip.emb, 9), ArgumentError);
}

TEST_CASE("spatial-temporal attention matches a loop oracle") {
    Rng rng(8);
    const Tensor q = rng.normal_tensor({6, 5, 3}, 1.0);
    const Tensor k = rng.normal_tensor({6, 5, 3}, 1.0);
    const Tensor v = rng.normal_tensor({6, 5, 3}, 1.0);
    for (int frames : {1, 2, 3}) {
        const Tensor got = spatial_temporal_attention(Var(q), Var(k), Var(v), frames).value();
        CHECK(max_abs_diff(got, st_attention_oracle(q, k, v, frames)) < 1e-12);
    }
    CHECK(bit_equal(spatial_temporal_attention(Var(q), Var(k), Var(v), 1).value(),
                    self_attention(Var(q), Var(k), Var(v)).value()));
    CHECK_THROWS_AS(spatial_temporal_attention(Var(q), Var(k), Var(v), 4), ArgumentError);
}

TEST_CASE("video backbone gradients reach the temporal parameters") {
    BackboneConfig cfg;
    cfg.channels = {8, 16};
    cfg.d_emb = 8;
    cfg.max_frames = 3;
    Backbone img(cfg, 6);
    perturb(img, 0.1, "unet/enc1.attn.proj");
    Backbone vid = Backbone::inflate(img);
    perturb(vid, 0.1);
    auto in = make_inputs(3, 4, 9, cfg);
    Rng rng(4);
    const Tensor w = rng.normal_tensor({3, 4, 4, 4}, 1.0);

    // Finite-difference check on a handful of temporal tensors.
    for (const char* name : {"unet/temporal/enc1.attn.rel_bias", "unet/temporal/enc1.attn.st_gate",
                             "unet/temporal/mid.conv.weight", "unet/temporal/enc1.attn.qkv.weight"}) {
        Var p = vid.params().get(name);
        const Tensor base = p.value();
        auto eval = [&](const Tensor& value) {
            p.node()->value = value;
            ag::NoGradGuard ng;
            return ops::sum(ops::mul(vid.predict_video(in.z, in.content, in.emb, 3), Var(w))).value()[0];
        };
        vid.params().zero_grad();
        p.node()->value = base;
        ag::backward(ops::sum(ops::mul(vid.predict_video(in.z, in.content, in.emb, 3), Var(w))));
        const Tensor analytic = p.grad();
        double num2 = 0, diff2 = 0;
        const std::size_t stride = std::max<std::size_t>(1, base.numel() / 20);
        for (std::size_t i = 0; i < base.numel(); i += stride) {
            Tensor plus = base, minus = base;
            plus[i] += 1e-4;
            minus[i] -= 1e-4;
            const double numeric = (eval(plus) - eval(minus)) / 2e-4;
            num2 += numeric * numeric;
            diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
        }
        p.node()->value = base;
        const std::string label = name;
        CAPTURE(label);
        CHECK(num2 > 0);
        CHECK(std::sqrt(diff2 / num2) < 1e-5);
    }
}

TEST_CASE("checkpoint round trip in both modes") {
    const fs::path dir = fs::temp_directory_path() / "hicast_test_backbone_ckpt";
    Backbone img(BackboneConfig{}, 7);
    Backbone vid = Backbone::inflate(img);
    perturb(vid, 0.05);
    auto in = make_inputs(2, 8, 1);
    for (const Backbone* b : {&img, &vid}) {
        fs::remove_all(dir);
        b->save(dir, 5);
        Backbone r = Backbone::load(dir);
        CHECK(r.temporal() == b->temporal());
        CHECK(r.params().trainable().size() == b->params().trainable().size());
        const Tensor x = b->temporal() ? b->predict_video(in.z, in.content, in.emb, 2).value()
                                       : b->predict(in.z, in.content, in.emb).value();
        const Tensor y = r.temporal() ? r.predict_video(in.z, in.content, in.emb, 2).value()
                                      : r.predict(in.z, in.content, in.emb).value();
        CHECK(bit_equal(x, y));
    }
    fs::remove_all(dir);
}
