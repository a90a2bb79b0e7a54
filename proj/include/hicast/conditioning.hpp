// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/image.hpp"
#include "hicast/codec.hpp"
#include "hicast/layers.hpp"

namespace hicast {

struct FeatureNetConfig {
    std::vector<int> channels{8, 16, 32};  // one conv level per entry, halving resolution between levels
    int classes = 4;

    void validate() const;
    int levels() const { return static_cast<int>(channels.size()); }
    /// Length of style_stats: 2 * sum(channels).
    int stats_dim() const;
};

void to_json(nlohmann::json& j, const FeatureNetConfig& c);
void from_json(const nlohmann::json& j, FeatureNetConfig& c);

/// Small convolutional classifier whose per-level activations stand in for a
/// pretrained perceptual network.
class FeatureNet {
public:
    FeatureNet(FeatureNetConfig cfg, std::uint64_t seed);

    const FeatureNetConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// Post-activation features of every level, [N, C_l, H/2^l, W/2^l].
    std::vector<Var> features(const Var& images) const;
    Var logits(const Var& images) const;

    bool frozen() const { return frozen_; }
    void freeze();
    double validation_accuracy() const { return accuracy_; }
    void set_validation_accuracy(double a) { accuracy_ = a; }

    void save(const std::filesystem::path& dir, long step = 0) const;
    static FeatureNet load(const std::filesystem::path& dir);

private:
    FeatureNetConfig cfg_;
    std::uint64_t seed_;
    ParamSet params_{"features/"};
    std::vector<nn::Conv2d> convs_;
    nn::Linear head_;
    bool frozen_ = false;
    double accuracy_ = 0.0;
};

struct FeatureTrainConfig {
    int steps = 400;
    int batch = 32;
    double lr = 3e-3;
    std::uint64_t seed = 0;
};

struct FeatureTrainReport {
    std::vector<double> losses;
    double accuracy = 0.0;  // on the validation set
};

/// Trains on style-family labels, measures validation accuracy, then freezes.
FeatureTrainReport train_feature_net(FeatureNet& net, const std::vector<Image>& train,
                                     const std::vector<Image>& validation, const FeatureTrainConfig& cfg);
double classification_accuracy(const FeatureNet& net, const std::vector<Image>& labeled);

/// Per level: per-channel mean then per-channel variance, concatenated over
/// levels -> [N, stats_dim]. Requires a frozen net.
Var style_stats(const Var& images, const FeatureNet& net);
Tensor style_stats(const Image& image, const FeatureNet& net);

struct ConditioningConfig {
    int latent_channels = 4;
    int content_channels = 3;
    int d_emb = 64;
    int stats_dim = 112;
    int content_hidden = 32;
    int timesteps = 1000;
};

void to_json(nlohmann::json& j, const ConditioningConfig& c);
void from_json(const nlohmann::json& j, ConditioningConfig& c);

struct ContentFeatures {
    Tensor values;  // [c_content, h, w]
    int timestep = 0;
    bool is_null = false;
};

struct StyleEmbedding {
    Tensor values;  // [d_emb]
    bool is_null = false;
};

/// Sinusoidal features of width d for each timestep: [B, d].
Tensor sinusoidal_embedding(const std::vector<int>& t, int d);

/// Timestep embedding, style MLP, content encoder and the learned null tokens.
class Conditioner {
public:
    Conditioner(ConditioningConfig cfg, std::uint64_t seed);

    const ConditioningConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// [B, d_emb]
    Var time_embedding(const std::vector<int>& t) const;
    /// stats [B, S] -> [B, d_emb]; rows flagged in null_rows take the null token.
    Var embed_style(const Var& stats, const std::vector<bool>& null_rows = {}) const;
    /// latents [B, c_lat, h, w] at timesteps t -> [B, c_content, h, w]; null rows
    /// take the broadcast null content token.
    Var encode_content(const Var& latents, const std::vector<int>& t, const std::vector<bool>& null_rows = {}) const;
    Var null_style_rows(int n) const;
    Var null_content_maps(int n, int h, int w) const;

    const Var& null_style_param() const { return null_style_; }
    const Var& null_content_param() const { return null_content_; }

    // Single-item conveniences.
    StyleEmbedding embed_style(const Tensor& stats) const;
    StyleEmbedding null_style() const;
    ContentFeatures encode_content(const Latent& latent, int t) const;
    ContentFeatures null_content(int t, int h, int w) const;

    void check_timesteps(const std::vector<int>& t) const;

    void save(const std::filesystem::path& dir, long step = 0) const;
    static Conditioner load(const std::filesystem::path& dir);

private:
    ConditioningConfig cfg_;
    std::uint64_t seed_;
    ParamSet params_{"cond/"};
    nn::Linear time0_, time1_;
    nn::Linear style0_, style1_;
    nn::Linear film_;
    nn::Conv2d content0_, content1_;
    Var null_style_;
    Var null_content_;
};

}  // namespace hicast
