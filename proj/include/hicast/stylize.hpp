// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "hicast/trainer.hpp"

namespace hicast {

/// An adapter plus its control maps [B, 1, H, W] and weight.
struct AdapterInput {
    const StyleAdapter* adapter = nullptr;
    Tensor maps;
    double weight = 1.0;
};

/// Sums w_j * adapter_j(maps_j); empty when there are no inputs.
AdapterPyramid adapter_features(const std::vector<AdapterInput>& inputs);

/// Guidance branches for a batch of content latents [B, c, h, w] and style
/// statistics [B, S]. frames > 0 runs the backbone in video mode. The adapter
/// pyramid is added in every branch.
BranchFn make_branch_fn(const Conditioner& cond, const Backbone& unet, const Tensor& content_latents,
                        const Tensor& style_stats, const AdapterPyramid& adapters, int frames = 0);

struct StylizeSettings {
    StyleScalingFactors w;
    SamplerConfig sampler;
};

/// content [B, 3, H, W]; style [1 or B, 3, H, W]; returns decoded pixels [B, 3, H, W].
/// With a video backbone, B counts frames of one clip.
Tensor stylize(const FrozenModels& frozen, const ImageModel& model, const Backbone& unet, const Tensor& content,
               const Tensor& style, const std::vector<AdapterInput>& adapters, const StylizeSettings& s,
               const NoiseSchedule& schedule);

/// Same, returning the sampled latents before decoding.
Tensor stylize_latents(const FrozenModels& frozen, const ImageModel& model, const Backbone& unet,
                       const Tensor& content, const Tensor& style, const std::vector<AdapterInput>& adapters,
                       const StylizeSettings& s, const NoiseSchedule& schedule);

/// Control maps of a batch of images for one annotator kind.
Tensor control_maps(const Tensor& pixels, ControlKind kind);

}  // namespace hicast
