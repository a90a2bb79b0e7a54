// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/conditioning.hpp"
#include "hicast/layers.hpp"

namespace hicast {

struct LossWeights {
    double lambda_c = 2.0;
    double lambda_s = 4.0;
    double lambda_g = 1.0;
    double lambda_pg = 2.0;
    double lambda_hg1 = 0.01;
    double lambda_hg2 = 2.0;
    double lambda_hl = 1.0;
    double tau = 0.07;
    /// Use mean squared error instead of RMS for the norms of the content,
    /// style and harmonious terms.
    bool squared = false;

    void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// ||a||_2 normalized by sqrt(numel) (or its square when `squared`).
Var norm_l2(const Var& diff, bool squared = false);

/// lambda_c * ||eps - eps_hat||
Var content_loss(const Var& eps, const Var& eps_hat, const LossWeights& w);

/// lambda_s * sum over feature levels of ||mu_out - mu_s|| + ||sigma_out - sigma_s||.
Var style_loss(const Var& out_images, const Var& style_images, const FeatureNet& net, const LossWeights& w);

/// Per-level channel means and standard deviations (sqrt(var + 1e-5)).
std::vector<std::pair<Var, Var>> feature_moments(const Var& images, const FeatureNet& net);

struct DiscriminatorConfig {
    int base_channels = 16;
    int reference_crops = 4;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// Whole-image discriminator and a patch co-occurrence discriminator that
/// scores one crop against a set of reference crops. Both return logits.
class Discriminators {
public:
    Discriminators(DiscriminatorConfig cfg, std::uint64_t seed);

    const DiscriminatorConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// [B, 3, H, W] -> [B, 1]
    Var image_logits(const Var& images) const;
    /// crops [B, 3, h, w], refs [B * R, 3, h, w] -> [B, 1]
    Var patch_logits(const Var& crops, const Var& refs) const;

    void save(const std::filesystem::path& dir, long step = 0) const;
    static Discriminators load(const std::filesystem::path& dir);

private:
    Var patch_code(const Var& crops) const;

    DiscriminatorConfig cfg_;
    std::uint64_t seed_;
    ParamSet params_{"disc/"};
    std::vector<nn::Conv2d> image_convs_;
    nn::Linear image_head_;
    std::vector<nn::Conv2d> patch_convs_;
    nn::Linear patch_fc0_, patch_fc1_;
};

/// One output crop plus R reference crops per sample, all H/4 x W/4.
struct CropPlan {
    int size = 0;
    std::vector<ops::Window> out;   // one per sample of I_out
    std::vector<ops::Window> real;  // one per sample of I_s (the real query crop)
    std::vector<ops::Window> refs;  // R per sample of I_s, sample-major
};

/// Uniform random windows drawn from rng; throws ArgumentError if images are
/// smaller than 4x4.
CropPlan plan_crops(int batch, int height, int width, int refs, Rng& rng);

struct GanTerms {
    Var g_loss;   // lambda_G (E[log D(I_s)] + E[1 - log D(I_out)])
    Var d_loss;   // binary cross-entropy of the image discriminator
    Var patch_g;  // lambda_pG E[-log D_patch(crop(I_out), crops(I_s))]
    Var patch_d;  // binary cross-entropy of the patch discriminator
};

/// g_loss and patch_g only; they differentiate through out_images.
GanTerms generator_gan_terms(const Var& out_images, const Var& style_images, const Discriminators& d,
                             const CropPlan& crops, const LossWeights& w);
/// d_loss and patch_d only, on out_images detached.
GanTerms discriminator_gan_terms(const Var& out_images, const Var& style_images, const Discriminators& d,
                                 const CropPlan& crops);
/// All four terms, built as two separate graphs.
GanTerms gan_losses(const Var& out_images, const Var& style_images, const Discriminators& d, const CropPlan& crops,
                    const LossWeights& w);

/// Sum over anchor rows of -log softmax([v.v+, v.v-_1..K] / tau)[0].
/// v, pos: [M, D]; neg: [M, K, D].
Var patch_contrastive(const Var& v, const Var& pos, const Var& neg, double tau);

struct PatchGeometry {
    int size = 8;
    int stride = 8;
    int neighbours = 8;
    int nonlocal = 8;
};

/// Anchor corners on the stride grid plus, for each anchor, 8 neighbour
/// corners (stride offsets, reflected at the border) and 8 seeded corners at
/// Chebyshev distance >= H/2.
struct PatchLayout {
    std::vector<std::pair<int, int>> anchors;
    std::vector<std::vector<std::pair<int, int>>> negatives;  // [anchor][16]
};

PatchLayout make_patch_layout(int height, int width, const PatchGeometry& g, std::uint64_t seed);

struct HarmoniousTerms {
    Var total;
    Var global_noise;  // lambda_hg1 ||eps - eps_hat||
    Var global_image;  // lambda_hg2 sum_i ||eps_hat^i - eps_I^i||
    Var local;         // lambda_hl sum over frames and anchors of patch_contrastive
};

/// eps_hat [N, c, h, w] from the video model, eps and eps_image [N, c, h, w]
/// constants, out_frames [N, 3, H, W] decoded from the video model's x0,
/// content_frames [N, 3, H, W].
HarmoniousTerms harmonious_loss(const Var& eps_hat, const Tensor& eps, const Tensor& eps_image, const Var& out_frames,
                                const Tensor& content_frames, const FeatureNet& net, const PatchLayout& layout,
                                const PatchGeometry& g, const LossWeights& w);

}  // namespace hicast
