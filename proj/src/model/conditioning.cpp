// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/conditioning.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "hicast/checkpoint.hpp"
#include "hicast/codec.hpp"
#include "hicast/errors.hpp"
#include "hicast/optim.hpp"

namespace hicast {

void FeatureNetConfig::validate() const {
    if (channels.size() < 3) throw ConfigError("feature net needs at least 3 levels");
    for (int c : channels)
        if (c < 1) throw ConfigError("feature net channel counts must be positive");
    if (classes < 2) throw ConfigError("feature net needs at least 2 classes");
}

int FeatureNetConfig::stats_dim() const { return 2 * std::accumulate(channels.begin(), channels.end(), 0); }

void to_json(nlohmann::json& j, const FeatureNetConfig& c) { j = {{"channels", c.channels}, {"classes", c.classes}}; }

void from_json(const nlohmann::json& j, FeatureNetConfig& c) {
    c.channels = j.value("channels", c.channels);
    c.classes = j.value("classes", c.classes);
}

FeatureNet::FeatureNet(FeatureNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "features-init"));
    int in = 3;
    for (int l = 0; l < cfg_.levels(); ++l) {
        convs_.emplace_back(params_, "level" + std::to_string(l), in, cfg_.channels[l], 3, 1, rng);
        in = cfg_.channels[l];
    }
    head_ = nn::Linear(params_, "head", in, cfg_.classes, rng);
}

std::vector<Var> FeatureNet::features(const Var& images) const {
    if (images.shape().size() != 4 || images.dim(1) != 3)
        throw ArgumentError("feature net expects [N,3,H,W], got " + shape_str(images.shape()));
    const int down = 1 << (cfg_.levels() - 1);
    if (images.dim(2) % down || images.dim(3) % down)
        throw ArgumentError("feature net input size must be divisible by " + std::to_string(down));
    std::vector<Var> out;
    Var h = images;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
        if (l > 0) h = ops::avg_pool2(h);
        h = ops::silu(convs_[l](h));
        out.push_back(h);
    }
    return out;
}

Var FeatureNet::logits(const Var& images) const { return head_(ops::global_avg_pool(features(images).back())); }

void FeatureNet::freeze() {
    frozen_ = true;
    params_.set_trainable(false);
}

void FeatureNet::save(const std::filesystem::path& dir, long step) const {
    CheckpointInfo info;
    info.module = "feature_net";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    info.extra = {{"frozen", frozen_}, {"level_channels", cfg_.channels}, {"validation_accuracy", accuracy_}};
    save_checkpoint(dir, info, params_.snapshot());
}

FeatureNet FeatureNet::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "feature_net") throw FormatError(dir.string() + " is not a feature_net checkpoint");
    FeatureNet net(ck.info.config.get<FeatureNetConfig>(), ck.info.seed);
    net.params_.load(ck.tensors);
    net.accuracy_ = ck.info.extra.value("validation_accuracy", 0.0);
    if (ck.info.extra.value("frozen", false)) net.freeze();
    return net;
}

namespace {

std::vector<int> family_labels(const std::vector<Image>& data, const char* what) {
    std::vector<int> labels;
    for (const Image& img : data) {
        if (!img.style_family) throw ArgumentError(std::string(what) + ": image '" + img.id + "' has no style family");
        labels.push_back(*img.style_family);
    }
    return labels;
}

}  // namespace

double classification_accuracy(const FeatureNet& net, const std::vector<Image>& labeled) {
    if (labeled.empty()) return 0.0;
    const std::vector<int> labels = family_labels(labeled, "classification_accuracy");
    ag::NoGradGuard ng;
    int correct = 0;
    const int n = static_cast<int>(labeled.size());
    for (int start = 0; start < n; start += 64) {
        const int cnt = std::min(64, n - start);
        std::vector<Image> part(labeled.begin() + start, labeled.begin() + start + cnt);
        Tensor lg = net.logits(Var(stack_pixels(part))).value();
        const int k = lg.dim(1);
        for (int i = 0; i < cnt; ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c)
                if (lg[i * k + c] > lg[i * k + best]) best = c;
            correct += best == labels[start + i];
        }
    }
    return static_cast<double>(correct) / n;
}

FeatureTrainReport train_feature_net(FeatureNet& net, const std::vector<Image>& train,
                                     const std::vector<Image>& validation, const FeatureTrainConfig& cfg) {
    if (net.frozen()) throw StateError("feature net is already frozen");
    const std::vector<int> labels = family_labels(train, "train_feature_net");
    std::map<int, int> classes;
    for (int l : labels) {
        if (l < 0 || l >= net.config().classes) throw ArgumentError("style family label out of range");
        ++classes[l];
    }
    if (classes.size() < 2) throw ArgumentError("train_feature_net needs at least 2 classes");

    FeatureTrainReport report;
    Rng rng(derive_seed(cfg.seed, "features-train"));
    net.params().set_trainable(true);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Adam opt(net.params().trainable(), acfg);
    const Tensor all = stack_pixels(train);
    const int n = static_cast<int>(train.size());
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> idx(std::min(cfg.batch, n));
        for (int& i : idx) i = rng.randint(0, n - 1);
        std::vector<int> y;
        for (int i : idx) y.push_back(labels[i]);
        Var loss = ops::cross_entropy(net.logits(Var(ops::gather_leading(Var(all), idx).value())), y);
        ag::backward(loss);
        opt.step();
        report.losses.push_back(loss.value()[0]);
    }
    report.accuracy = classification_accuracy(net, validation);
    net.set_validation_accuracy(report.accuracy);
    net.freeze();
    return report;
}

Var style_stats(const Var& images, const FeatureNet& net) {
    if (!net.frozen()) throw StateError("style_stats requires a frozen feature net");
    std::vector<Var> parts;
    for (const Var& f : net.features(images)) {
        parts.push_back(ops::global_avg_pool(f));
        parts.push_back(ops::channel_variance(f));
    }
    return ops::concat(parts, 1);
}

Tensor style_stats(const Image& image, const FeatureNet& net) {
    validate_image(image, 0);
    ag::NoGradGuard ng;
    Tensor s = style_stats(Var(image.pixels.reshaped({1, 3, image.height(), image.width()})), net).value();
    return s.reshaped({s.dim(1)});
}

void to_json(nlohmann::json& j, const ConditioningConfig& c) {
    j = {{"latent_channels", c.latent_channels}, {"content_channels", c.content_channels}, {"d_emb", c.d_emb},
         {"stats_dim", c.stats_dim}, {"content_hidden", c.content_hidden}, {"timesteps", c.timesteps}};
}

void from_json(const nlohmann::json& j, ConditioningConfig& c) {
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.content_channels = j.value("content_channels", c.content_channels);
    c.d_emb = j.value("d_emb", c.d_emb);
    c.stats_dim = j.value("stats_dim", c.stats_dim);
    c.content_hidden = j.value("content_hidden", c.content_hidden);
    c.timesteps = j.value("timesteps", c.timesteps);
}

Tensor sinusoidal_embedding(const std::vector<int>& t, int d) {
    const int half = d / 2;
    Tensor out({static_cast<int>(t.size()), d});
    for (std::size_t i = 0; i < t.size(); ++i)
        for (int k = 0; k < half; ++k) {
            const double freq = std::exp(-std::log(10000.0) * k / half);
            out[i * d + k] = std::sin(t[i] * freq);
            out[i * d + half + k] = std::cos(t[i] * freq);
        }
    return out;
}

Conditioner::Conditioner(ConditioningConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    if (cfg_.d_emb < 2 || cfg_.d_emb % 2) throw ConfigError("d_emb must be a positive even number");
    if (cfg_.content_channels < 1 || cfg_.latent_channels < 1 || cfg_.stats_dim < 1)
        throw ConfigError("conditioning channel counts must be positive");
    Rng rng(derive_seed(seed, "cond-init"));
    const int d = cfg_.d_emb;
    time0_ = nn::Linear(params_, "time.fc0", d, d, rng);
    time1_ = nn::Linear(params_, "time.fc1", d, d, rng);
    style0_ = nn::Linear(params_, "style.fc0", cfg_.stats_dim, d, rng);
    style1_ = nn::Linear(params_, "style.fc1", d, d, rng);
    film_ = nn::Linear(params_, "content.film", d, 2 * cfg_.latent_channels, rng);
    content0_ = nn::Conv2d(params_, "content.conv0", cfg_.latent_channels, cfg_.content_hidden, 3, 1, rng);
    content1_ = nn::Conv2d(params_, "content.conv1", cfg_.content_hidden, cfg_.content_channels, 3, 1, rng);
    null_style_ = params_.add("null_style", rng.normal_tensor({d}, 0.1));
    null_content_ = params_.add("null_content", rng.normal_tensor({cfg_.content_channels}, 0.1));
}

void Conditioner::check_timesteps(const std::vector<int>& t) const {
    for (int v : t)
        if (v < 0 || v >= cfg_.timesteps)
            throw ArgumentError("timestep " + std::to_string(v) + " outside [0, " + std::to_string(cfg_.timesteps) + ")");
}

Var Conditioner::time_embedding(const std::vector<int>& t) const {
    check_timesteps(t);
    Var s(sinusoidal_embedding(t, cfg_.d_emb));
    return time1_(ops::silu(time0_(s)));
}

namespace {

// Rows i with null_rows[i] come from `null_row` (leading dim 1); others from `values`.
Var select_rows(const Var& values, const Var& null_row, const std::vector<bool>& null_rows) {
    const int n = values.dim(0);
    if (null_rows.empty()) return values;
    if (static_cast<int>(null_rows.size()) != n) throw ArgumentError("null mask length does not match batch");
    bool any = false;
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) {
        idx[i] = null_rows[i] ? n : i;
        any = any || null_rows[i];
    }
    if (!any) return values;
    return ops::gather_leading(ops::concat({values, null_row}, 0), idx);
}

}  // namespace

Var Conditioner::null_style_rows(int n) const { return ops::broadcast_rows(null_style_, n); }

Var Conditioner::null_content_maps(int n, int h, int w) const { return ops::broadcast_map(null_content_, n, h, w); }

Var Conditioner::embed_style(const Var& stats, const std::vector<bool>& null_rows) const {
    if (stats.shape().size() != 2 || stats.dim(1) != cfg_.stats_dim)
        throw ArgumentError("style stats must be [B," + std::to_string(cfg_.stats_dim) + "], got " +
                            shape_str(stats.shape()));
    Var e = style1_(ops::silu(style0_(stats)));
    return select_rows(e, null_style_rows(1), null_rows);
}

Var Conditioner::encode_content(const Var& latents, const std::vector<int>& t, const std::vector<bool>& null_rows) const {
    if (latents.shape().size() != 4 || latents.dim(1) != cfg_.latent_channels)
        throw ArgumentError("content latents must be [B," + std::to_string(cfg_.latent_channels) + ",h,w], got " +
                            shape_str(latents.shape()));
    if (static_cast<int>(t.size()) != latents.dim(0)) throw ArgumentError("timestep count does not match batch");
    const int c = cfg_.latent_channels;
    Var film = film_(ops::silu(time_embedding(t)));  // [B, 2c]
    Var fr = ops::reshape(film, {latents.dim(0), 2, c});
    Var perm = ops::permute(fr, {1, 0, 2});  // [2, B, c]
    Var scale = ops::reshape(ops::slice_leading(perm, 0, 1), {latents.dim(0), c});
    Var shift = ops::reshape(ops::slice_leading(perm, 1, 1), {latents.dim(0), c});
    Var h = ops::add(latents, ops::mul_per_sample_channel(latents, scale));
    h = ops::add_per_sample_channel(h, shift);
    Var f = content1_(ops::silu(content0_(h)));
    return select_rows(f, null_content_maps(1, latents.dim(2), latents.dim(3)), null_rows);
}

StyleEmbedding Conditioner::embed_style(const Tensor& stats) const {
    ag::NoGradGuard ng;
    if (stats.rank() != 1) throw ArgumentError("style stats must be a vector");
    StyleEmbedding e;
    e.values = embed_style(Var(stats.reshaped({1, stats.dim(0)}))).value().reshaped({cfg_.d_emb});
    return e;
}

StyleEmbedding Conditioner::null_style() const {
    StyleEmbedding e;
    e.values = null_style_.value();
    e.is_null = true;
    return e;
}

ContentFeatures Conditioner::encode_content(const Latent& latent, int t) const {
    ag::NoGradGuard ng;
    const Tensor& v = latent.values;
    if (v.rank() != 3) throw ArgumentError("latent must be [c,h,w]");
    ContentFeatures f;
    Tensor out = encode_content(Var(v.reshaped({1, v.dim(0), v.dim(1), v.dim(2)})), {t}).value();
    f.values = out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
    f.timestep = t;
    return f;
}

ContentFeatures Conditioner::null_content(int t, int h, int w) const {
    check_timesteps({t});
    ag::NoGradGuard ng;
    ContentFeatures f;
    Tensor m = null_content_maps(1, h, w).value();
    f.values = m.reshaped({m.dim(1), h, w});
    f.timestep = t;
    f.is_null = true;
    return f;
}

void Conditioner::save(const std::filesystem::path& dir, long step) const {
    CheckpointInfo info;
    info.module = "conditioner";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    save_checkpoint(dir, info, params_.snapshot());
}

Conditioner Conditioner::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "conditioner") throw FormatError(dir.string() + " is not a conditioner checkpoint");
    Conditioner c(ck.info.config.get<ConditioningConfig>(), ck.info.seed);
    c.params_.load(ck.tensors);
    return c;
}

}  // namespace hicast
