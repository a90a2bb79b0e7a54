// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"

namespace hicast {

void BackboneConfig::validate() const {
    if (channels.size() < 2) throw ConfigError("backbone needs at least 2 levels");
    for (int c : channels)
        if (c < 1) throw ConfigError("backbone channel counts must be positive");
    for (int a : attention_levels)
        if (a < 0 || a >= levels()) throw ConfigError("attention level out of range");
    if (d_emb < 1 || latent_channels < 1 || content_channels < 0) throw ConfigError("invalid backbone widths");
    if (max_frames < 1) throw ConfigError("max_frames must be positive");
}

bool BackboneConfig::has_attention(int level) const {
    return std::find(attention_levels.begin(), attention_levels.end(), level) != attention_levels.end();
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
    j = {{"channels", c.channels},           {"attention_levels", c.attention_levels},
         {"d_emb", c.d_emb},                 {"latent_channels", c.latent_channels},
         {"content_channels", c.content_channels}, {"max_frames", c.max_frames}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
    c.channels = j.value("channels", c.channels);
    c.attention_levels = j.value("attention_levels", c.attention_levels);
    c.d_emb = j.value("d_emb", c.d_emb);
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.content_channels = j.value("content_channels", c.content_channels);
    c.max_frames = j.value("max_frames", c.max_frames);
}

Backbone::ResBlock Backbone::make_res(const std::string& name, int in, int out, Rng& rng) {
    ResBlock r;
    r.norm0 = nn::GroupNorm(params_, name + ".norm0", in, nn::norm_groups(in));
    r.conv0 = nn::Conv2d(params_, name + ".conv0", in, out, 3, 1, rng);
    r.emb = nn::Linear(params_, name + ".emb", cfg_.d_emb, out, rng);
    r.norm1 = nn::GroupNorm(params_, name + ".norm1", out, nn::norm_groups(out));
    r.conv1 = nn::Conv2d(params_, name + ".conv1", out, out, 3, 1, rng, true);
    if (in != out) {
        r.skip = nn::Conv2d(params_, name + ".skip", in, out, 1, 1, rng);
        r.has_skip = true;
    }
    return r;
}

Backbone::Attention Backbone::make_attn(const std::string& name, int ch, Rng& rng) {
    Attention a;
    a.norm = nn::GroupNorm(params_, name + ".norm", ch, nn::norm_groups(ch));
    a.qkv = nn::Conv2d(params_, name + ".qkv", ch, 3 * ch, 1, 1, rng);
    a.proj = nn::Conv2d(params_, name + ".proj", ch, ch, 1, 1, rng, true);
    return a;
}

Backbone::Backbone(BackboneConfig cfg, std::uint64_t seed, bool temporal)
    : cfg_(std::move(cfg)), seed_(seed), temporal_(temporal) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "unet-init"));
    const auto& ch = cfg_.channels;
    const int levels = cfg_.levels();
    in_conv_ = nn::Conv2d(params_, "in", cfg_.latent_channels + cfg_.content_channels, ch[0], 3, 1, rng);
    enc_attn_.resize(levels);
    for (int k = 0; k < levels; ++k) {
        const std::string p = "enc" + std::to_string(k);
        if (k > 0) down_.emplace_back(params_, "down" + std::to_string(k), ch[k - 1], ch[k - 1], 3, 2, rng);
        enc_res_.push_back(make_res(p + ".res", k == 0 ? ch[0] : ch[k - 1], ch[k], rng));
        if (cfg_.has_attention(k)) enc_attn_[k] = make_attn(p + ".attn", ch[k], rng);
    }
    mid_ = make_res("mid.res", ch.back(), ch.back(), rng);
    dec_res_.resize(levels);
    for (int k = levels - 1; k >= 0; --k) {
        dec_res_[k] = make_res("dec" + std::to_string(k) + ".res", 2 * ch[k], ch[k], rng);
        if (k > 0) up_.emplace_back();
    }
    for (int k = levels - 1; k > 0; --k)
        up_[k - 1] = nn::Conv2d(params_, "up" + std::to_string(k), ch[k], ch[k - 1], 3, 1, rng);
    out_norm_ = nn::GroupNorm(params_, "out.norm", ch[0], nn::norm_groups(ch[0]));
    out_conv_ = nn::Conv2d(params_, "out.conv", ch[0], cfg_.latent_channels, 3, 1, rng);

    if (temporal_) {
        Rng trng(derive_seed(seed, "unet-temporal-init"));
        add_temporal_layers(trng);
    }
}

void Backbone::add_temporal_layers(Rng& rng) {
    auto make_tconv = [&](const std::string& name, int c) {
        TemporalConv t;
        t.norm = nn::GroupNorm(params_, name + ".norm", c, nn::norm_groups(c));
        t.weight = params_.add(name + ".weight", init::zeros({c, c, 3}));
        t.bias = params_.add(name + ".bias", init::zeros({c}));
        return t;
    };
    const auto& ch = cfg_.channels;
    for (int k = 0; k < cfg_.levels(); ++k) {
        t_enc_.push_back(make_tconv("temporal/enc" + std::to_string(k) + ".conv", ch[k]));
        t_dec_.push_back(make_tconv("temporal/dec" + std::to_string(k) + ".conv", ch[k]));
    }
    t_mid_ = make_tconv("temporal/mid.conv", ch.back());
    t_attn_.resize(cfg_.levels());
    for (int k = 0; k < cfg_.levels(); ++k) {
        if (!cfg_.has_attention(k)) continue;
        const std::string p = "temporal/enc" + std::to_string(k) + ".attn";
        TemporalAttention& t = t_attn_[k];
        t.norm = nn::GroupNorm(params_, p + ".norm", ch[k], nn::norm_groups(ch[k]));
        t.qkv = nn::Linear(params_, p + ".qkv", ch[k], 3 * ch[k], rng);
        t.proj = nn::Linear(params_, p + ".proj", ch[k], ch[k], rng, true);
        t.rel_bias = params_.add(p + ".rel_bias", init::zeros({2 * cfg_.max_frames - 1}));
        t.gate = params_.add(p + ".st_gate", init::zeros({1}));
    }
}

std::vector<Shape> Backbone::level_shapes(int h, int w) const {
    std::vector<Shape> out;
    for (int k = 0; k < cfg_.levels(); ++k) out.push_back({cfg_.channels[k], h >> k, w >> k});
    return out;
}

Var Backbone::res_forward(const ResBlock& r, const Var& x, const Var& emb) const {
    Var h = r.conv0(ops::silu(r.norm0(x)));
    h = ops::add_per_sample_channel(h, r.emb(ops::silu(emb)));
    h = r.conv1(ops::silu(r.norm1(h)));
    return ops::add(r.has_skip ? r.skip(x) : x, h);
}

Var self_attention(const Var& q, const Var& k, const Var& v) {
    const double s = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
    return ops::bmm(ops::softmax_last(ops::scale(ops::bmm(q, k, true), s)), v);
}

Var spatial_temporal_attention(const Var& q, const Var& k, const Var& v, int frames) {
    const int bf = q.dim(0), t = q.dim(1), c = q.dim(2);
    if (frames < 1 || bf % frames) throw ArgumentError("spatial_temporal_attention: batch not a multiple of frames");
    std::vector<int> clip_of(bf);
    for (int i = 0; i < bf; ++i) clip_of[i] = i / frames;
    auto expand = [&](const Var& x) {
        return ops::gather_leading(ops::reshape(x, {bf / frames, frames * t, c}), clip_of);
    };
    return self_attention(q, expand(k), expand(v));
}

Var Backbone::attn_forward(const Attention& a, const Var& x, int frames, const TemporalAttention* t) const {
    const int bf = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), tok = h * w;
    Var qkv = ops::permute(ops::reshape(a.qkv(a.norm(x)), {bf, 3, c, tok}), {1, 0, 3, 2});  // [3, BF, T, C]
    auto part = [&](int i) { return ops::reshape(ops::slice_leading(qkv, i, 1), {bf, tok, c}); };
    Var q = part(0), k = part(1), v = part(2);
    Var o = self_attention(q, k, v);
    if (t) {
        Var st = spatial_temporal_attention(q, k, v, frames);
        o = ops::add(o, ops::mul_scalar_var(ops::sub(st, o), t->gate));
    }
    o = ops::reshape(ops::permute(o, {0, 2, 1}), {bf, c, h, w});
    Var out = ops::add(x, a.proj(o));
    if (t) out = tattn_forward(*t, out, frames);
    return out;
}

Var Backbone::tconv_forward(const TemporalConv& t, const Var& x, int frames) const {
    return ops::add(x, ops::temporal_conv(ops::silu(t.norm(x)), frames, t.weight, t.bias));
}

Var Backbone::tattn_forward(const TemporalAttention& t, const Var& x, int frames) const {
    const int bf = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), tok = h * w, b = bf / frames;
    if (frames > cfg_.max_frames)
        throw ArgumentError("clip of " + std::to_string(frames) + " frames exceeds max_frames " +
                            std::to_string(cfg_.max_frames));
    Var seq = ops::permute(ops::reshape(t.norm(x), {b, frames, c, tok}), {0, 3, 1, 2});  // [B, T, F, C]
    Var qkv = t.qkv(ops::reshape(seq, {b * tok * frames, c}));
    qkv = ops::permute(ops::reshape(qkv, {b * tok, frames, 3, c}), {2, 0, 1, 3});  // [3, B*T, F, C]
    auto part = [&](int i) { return ops::reshape(ops::slice_leading(qkv, i, 1), {b * tok, frames, c}); };

    std::vector<int> rel(static_cast<std::size_t>(frames) * frames);
    for (int i = 0; i < frames; ++i)
        for (int j = 0; j < frames; ++j) rel[i * frames + j] = j - i + cfg_.max_frames - 1;
    Var bias = ops::reshape(ops::gather_leading(ops::reshape(t.rel_bias, {2 * cfg_.max_frames - 1, 1}), rel),
                            {frames, frames});
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    Var scores = ops::add_matrix_bias(ops::scale(ops::bmm(part(0), part(1), true), s), bias);
    Var o = ops::bmm(ops::softmax_last(scores), part(2));  // [B*T, F, C]
    o = t.proj(ops::reshape(o, {b * tok * frames, c}));
    o = ops::reshape(ops::permute(ops::reshape(o, {b, tok, frames, c}), {0, 2, 3, 1}), {bf, c, h, w});
    return ops::add(x, o);
}

Var Backbone::run(const Var& z, const Var& content, const Var& emb, int frames, const AdapterPyramid& adapters) const {
    const int levels = cfg_.levels();
    if (z.shape().size() != 4 || z.dim(1) != cfg_.latent_channels)
        throw ArgumentError("backbone: z must be [B," + std::to_string(cfg_.latent_channels) + ",h,w], got " +
                            shape_str(z.shape()));
    const int b = z.dim(0), h = z.dim(2), w = z.dim(3);
    if (content.shape() != Shape{b, cfg_.content_channels, h, w})
        throw ArgumentError("backbone: content features " + shape_str(content.shape()) + " do not match z " +
                            shape_str(z.shape()));
    if (emb.shape() != Shape{b, cfg_.d_emb})
        throw ArgumentError("backbone: embedding must be [B," + std::to_string(cfg_.d_emb) + "], got " +
                            shape_str(emb.shape()));
    if (h % (1 << (levels - 1)) || w % (1 << (levels - 1)))
        throw ArgumentError("backbone: latent size not divisible by 2^(levels-1)");
    if (!adapters.empty()) {
        if (static_cast<int>(adapters.size()) != levels) throw ArgumentError("adapter pyramid level count mismatch");
        auto shapes = level_shapes(h, w);
        for (int k = 0; k < levels; ++k) {
            Shape want{b, shapes[k][0], shapes[k][1], shapes[k][2]};
            if (adapters[k].shape() != want)
                throw ArgumentError("adapter level " + std::to_string(k) + " is " + shape_str(adapters[k].shape()) +
                                    ", backbone expects " + shape_str(want));
        }
    }
    if (!z.value().all_finite() || !content.value().all_finite() || !emb.value().all_finite())
        throw NumericError("backbone: non-finite input");

    const bool video = frames > 0;
    Var x = in_conv_(ops::concat({z, content}, 1));
    std::vector<Var> skips;
    for (int k = 0; k < levels; ++k) {
        if (k > 0) x = down_[k - 1](x);
        x = res_forward(enc_res_[k], x, emb);
        if (video) x = tconv_forward(t_enc_[k], x, frames);
        if (cfg_.has_attention(k)) x = attn_forward(enc_attn_[k], x, frames, video ? &t_attn_[k] : nullptr);
        if (!adapters.empty()) x = ops::add(x, adapters[k]);
        skips.push_back(x);
    }
    x = res_forward(mid_, x, emb);
    if (video) x = tconv_forward(t_mid_, x, frames);
    for (int k = levels - 1; k >= 0; --k) {
        x = res_forward(dec_res_[k], ops::concat({x, skips[k]}, 1), emb);
        if (video) x = tconv_forward(t_dec_[k], x, frames);
        if (k > 0) x = up_[k - 1](ops::upsample_nearest2(x));
    }
    return out_conv_(ops::silu(out_norm_(x)));
}

Var Backbone::predict(const Var& z, const Var& content, const Var& emb, const AdapterPyramid& adapters) const {
    return run(z, content, emb, 0, adapters);
}

Var Backbone::predict_video(const Var& z, const Var& content, const Var& emb, int frames,
                            const AdapterPyramid& adapters) const {
    if (!temporal_) throw StateError("backbone has no temporal layers; inflate it first");
    if (frames < 1 || z.dim(0) % frames) throw ArgumentError("video batch must be a multiple of the frame count");
    return run(z, content, emb, frames, adapters);
}

Backbone Backbone::inflate(const Backbone& image_model) {
    if (image_model.temporal()) throw ArgumentError("inflate expects an image-mode backbone");
    Backbone v(image_model.cfg_, image_model.seed_, true);
    const std::size_t copied = v.params_.copy_from(image_model.params_);
    if (copied != image_model.params_.size()) throw ArgumentError("inflate: parameter sets do not line up");
    v.params_.set_trainable(false);
    v.params_.set_trainable_matching("unet/temporal/", true);
    return v;
}

std::vector<std::string> Backbone::temporal_parameter_names() const {
    std::vector<std::string> out;
    for (const auto& [name, var] : params_.items())
        if (name.rfind("unet/temporal/", 0) == 0) out.push_back(name);
    return out;
}

void Backbone::save(const std::filesystem::path& dir, long step, const nlohmann::json& extra) const {
    CheckpointInfo info;
    info.module = "backbone";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    info.extra = extra.is_object() ? extra : nlohmann::json::object();
    info.extra["mode"] = temporal_ ? "video" : "image";
    save_checkpoint(dir, info, params_.snapshot());
}

Backbone Backbone::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "backbone") throw FormatError(dir.string() + " is not a backbone checkpoint");
    const bool video = ck.info.extra.value("mode", "image") == "video";
    Backbone b(ck.info.config.get<BackboneConfig>(), ck.info.seed, video);
    b.params_.load(ck.tensors);
    if (video) {
        b.params_.set_trainable(false);
        b.params_.set_trainable_matching("unet/temporal/", true);
    }
    return b;
}

}  // namespace hicast
