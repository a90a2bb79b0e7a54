// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/layers.hpp"

namespace hicast {

struct BackboneConfig {
    std::vector<int> channels{32, 64};  // one resolution level per entry
    std::vector<int> attention_levels{1};
    int d_emb = 64;
    int latent_channels = 4;
    int content_channels = 3;
    int max_frames = 8;  // relative-position table size for temporal attention

    void validate() const;
    int levels() const { return static_cast<int>(channels.size()); }
    bool has_attention(int level) const;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// Per-level additive maps, level k shaped [B, C_k, H_k, W_k]. Empty means absent.
using AdapterPyramid = std::vector<Var>;

/// Denoising U-Net eps(z_t, f_c, emb) where emb = time embedding + style
/// embedding. Video mode interleaves temporal layers with the frozen spatial
/// ones; all temporal parameters live under "unet/temporal/".
class Backbone {
public:
    Backbone(BackboneConfig cfg, std::uint64_t seed, bool temporal = false);

    const BackboneConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    bool temporal() const { return temporal_; }
    std::uint64_t seed() const { return seed_; }

    /// [C_k, H_k, W_k] of every encoder level for a latent of size h x w.
    std::vector<Shape> level_shapes(int h, int w) const;

    /// Image mode (temporal layers, if any, are bypassed).
    Var predict(const Var& z, const Var& content, const Var& emb, const AdapterPyramid& adapters = {}) const;
    /// Video mode over [B*frames, ...] inputs, frames consecutive per clip.
    Var predict_video(const Var& z, const Var& content, const Var& emb, int frames,
                      const AdapterPyramid& adapters = {}) const;

    /// Spatial weights copied from an image model, temporal layers added with
    /// zero-initialized outputs; only temporal parameters are trainable.
    static Backbone inflate(const Backbone& image_model);

    std::vector<std::string> temporal_parameter_names() const;

    void save(const std::filesystem::path& dir, long step = 0, const nlohmann::json& extra = {}) const;
    static Backbone load(const std::filesystem::path& dir);

private:
    struct ResBlock {
        nn::GroupNorm norm0, norm1;
        nn::Conv2d conv0, conv1;
        nn::Linear emb;
        nn::Conv2d skip;  // only when channel counts differ
        bool has_skip = false;
    };
    struct Attention {
        nn::GroupNorm norm;
        nn::Conv2d qkv, proj;
    };
    struct TemporalConv {
        nn::GroupNorm norm;
        Var weight, bias;  // [C, C, 3], [C]
    };
    struct TemporalAttention {
        nn::GroupNorm norm;
        nn::Linear qkv, proj;
        Var rel_bias;  // [2 * max_frames - 1]
        Var gate;      // spatial-temporal mixing weight, [1]
    };

    ResBlock make_res(const std::string& name, int in, int out, Rng& rng);
    Attention make_attn(const std::string& name, int ch, Rng& rng);
    void add_temporal_layers(Rng& rng);

    Var run(const Var& z, const Var& content, const Var& emb, int frames, const AdapterPyramid& adapters) const;
    Var res_forward(const ResBlock& r, const Var& x, const Var& emb) const;
    Var attn_forward(const Attention& a, const Var& x, int frames, const TemporalAttention* t) const;
    Var tconv_forward(const TemporalConv& t, const Var& x, int frames) const;
    Var tattn_forward(const TemporalAttention& t, const Var& x, int frames) const;

    BackboneConfig cfg_;
    std::uint64_t seed_;
    bool temporal_ = false;
    ParamSet params_{"unet/"};

    nn::Conv2d in_conv_;
    std::vector<ResBlock> enc_res_;
    std::vector<Attention> enc_attn_;  // indexed by level; unused entries empty
    std::vector<nn::Conv2d> down_;
    ResBlock mid_;
    std::vector<ResBlock> dec_res_;  // dec_res_[k] handles level k
    std::vector<nn::Conv2d> up_;     // up_[k] maps level k+1 -> level k
    nn::GroupNorm out_norm_;
    nn::Conv2d out_conv_;

    // Temporal layers (video mode only).
    std::vector<TemporalConv> t_enc_, t_dec_;
    TemporalConv t_mid_;
    std::vector<TemporalAttention> t_attn_;  // indexed by level
};

/// Spatial-temporal attention: queries from each frame, keys/values from all
/// frames of its clip. q, k, v are [B*F, T, C]; returns [B*F, T, C].
Var spatial_temporal_attention(const Var& q, const Var& k, const Var& v, int frames);
/// Plain per-frame attention over T tokens.
Var self_attention(const Var& q, const Var& k, const Var& v);

}  // namespace hicast
