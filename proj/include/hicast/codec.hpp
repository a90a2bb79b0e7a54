// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/image.hpp"
#include "hicast/layers.hpp"

namespace hicast {

struct CodecConfig {
    int factor = 4;  // 2, 4 or 8
    int latent_channels = 4;
    int base_channels = 16;

    void validate() const;
    int downsamples() const;
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

struct Latent {
    Tensor values;  // [c_lat, H/f, W/f], already multiplied by the codec's latent scale
    int source_height = 0;
    int source_width = 0;
};

/// Convolutional autoencoder: space-to-depth by 2, strided convs down to
/// 1/factor, residual blocks; the decoder mirrors it and ends in depth-to-space.
///  Latents handed to the diffusion model are the
/// encoder means multiplied by latent_scale (1/std over the training corpus).
class Codec {
public:
    Codec(CodecConfig cfg, std::uint64_t seed);

    const CodecConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }

    bool trained() const { return trained_; }
    double latent_scale() const { return latent_scale_; }
    void mark_trained(double latent_scale);

    /// Differentiable paths on [N, ...] batches; no clamping.
    Var encode_raw(const Var& images) const;
    Var encode_batch(const Var& images) const;
    Var decode_batch(const Var& latents) const;
    /// decode_batch clamped to [-1, 1], as images are.
    Var decode_images(const Var& latents) const;

    Latent encode(const Image& image) const;
    /// Output clamped to [-1, 1].
    Image decode(const Latent& latent) const;
    /// [N, 3, H, W] -> [N, c_lat, h, w] without gradients.
    Tensor encode_tensor(const Tensor& images) const;
    /// [N, c_lat, h, w] -> clamped [N, 3, H, W] without gradients.
    Tensor decode_tensor(const Tensor& latents) const;

    void save(const std::filesystem::path& dir, long step = 0) const;
    static Codec load(const std::filesystem::path& dir);

private:
    void require_trained() const;

    CodecConfig cfg_;
    std::uint64_t seed_;
    ParamSet params_{"codec/"};
    struct Res {
        nn::Conv2d a, b;
    };
    Var res(const Res& r, const Var& x) const;

    nn::Conv2d enc_in_;
    std::vector<nn::Conv2d> enc_down_;
    std::vector<Res> enc_level_res_;  // one per level above the bottleneck
    Res enc_res_;
    nn::Conv2d enc_out_;
    nn::Conv2d dec_in_;
    Res dec_res_;
    std::vector<nn::Conv2d> dec_up_;
    std::vector<Res> dec_up_res_;
    nn::Conv2d dec_out_;
    bool trained_ = false;
    double latent_scale_ = 1.0;
};

struct CodecTrainConfig {
    int steps = 1500;
    int batch = 16;
    double lr = 2e-3;
    std::uint64_t seed = 0;
    double latent_reg = 1e-6;
};

struct CodecTrainReport {
    std::vector<double> losses;  // reconstruction MSE per step
    double final_loss = 0.0;
};

/// Minimizes MSE reconstruction + latent_reg * mean squared latent, then sets
/// the latent scale from the training corpus.
CodecTrainReport train_codec(Codec& codec, const std::vector<Image>& data, const CodecTrainConfig& cfg);

/// PSNR in dB for images in [-1, 1] (peak-to-peak 2).
double psnr(const Tensor& a, const Tensor& b);

/// Stacks image pixels into [N, 3, H, W].
Tensor stack_pixels(const std::vector<Image>& images);

}  // namespace hicast
