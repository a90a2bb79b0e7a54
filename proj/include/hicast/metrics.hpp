// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/conditioning.hpp"

namespace hicast {

inline constexpr const char* kEvalSchema = "hicast-eval/1";

/// Gram matrix F F^T / (C H W) of one sample's features [C, H, W] -> [C, C].
Tensor gram_matrix(const Tensor& features);

/// Sum over levels of MSE between Gram matrices. Each list holds one [C, H, W]
/// tensor per level.
double gram_loss(const std::vector<Tensor>& a, const std::vector<Tensor>& b);
double gram_loss(const Image& out, const Image& style, const FeatureNet& net);

/// Mean over levels of the mean squared difference of features normalized to
/// unit length along channels at every position.
double perceptual_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b);
double perceptual_distance(const Image& a, const Image& b, const FeatureNet& net);

/// Features of one image, [C, H, W] per level.
std::vector<Tensor> image_features(const Tensor& pixels, const FeatureNet& net);

/// Displacement from frame t to frame t + gap ([2, H, W]) by iterated bilinear
/// lookup, and the pixels of frame t that stay valid along the way ([H, W]).
struct ComposedFlow {
    Tensor flow;
    Tensor valid;
};
ComposedFlow compose_flow(const Tensor& flows, const Tensor& occlusion, int t, int gap);

/// sqrt of the mean over frame pairs (t - i, t) of the masked mean squared
/// difference between O_{t-i} and O_t warped back along the composed flow.
/// frames [N, 3, H, W]; flows [N-1, 2, H, W]; occlusion [N-1, H, W].
double temporal_loss(const Tensor& frames, const Tensor& flows, const Tensor& occlusion, int i);
/// Flows and occlusion come from `source`; StateError if it has none.
double temporal_loss(const Tensor& frames, const VideoClip& source, int i);

struct EvalInputs {
    std::filesystem::path pred_dir;
    std::optional<std::filesystem::path> style;
    std::optional<std::filesystem::path> content_dir;
    std::optional<std::filesystem::path> flow_dir;  // defaults to content_dir
    std::vector<int> gaps{1};
};

nlohmann::json eval_report(const EvalInputs& in, const FeatureNet& net);

}  // namespace hicast
