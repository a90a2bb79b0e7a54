// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/adapter.hpp"
#include "hicast/backbone.hpp"
#include "hicast/codec.hpp"
#include "hicast/conditioning.hpp"
#include "hicast/diffusion.hpp"
#include "hicast/losses.hpp"

namespace hicast {

struct DataConfig {
    std::uint64_t seed = 0;
    int size = 32;
    int content_images = 256;
    int style_images = 256;
    int videos = 16;
    int frames = 4;
    int validation_images = 64;
    /// Optional gen-data output directory; empty means synthesize in memory.
    std::filesystem::path dir;
};

struct CodecSection {
    CodecConfig model;
    CodecTrainConfig train;
};

struct FeatureSection {
    FeatureNetConfig model;
    FeatureTrainConfig train;
};

struct DiffusionConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    SamplerConfig sampler;
};

/// (content_style, style_style, none_style, content_none)
struct SupervisionProbs {
    std::array<double, 4> p{0.7, 0.1, 0.1, 0.1};
    void validate() const;
};

struct StageSettings {
    int steps = 2000;
    int batch = 8;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    double clip_norm = 1.0;
    int checkpoint_every = 500;
    int log_every = 10;
    SupervisionProbs supervision;
    int frames = 4;  // temporal stage only

    void validate(const char* name) const;
};

struct StagesConfig {
    StageSettings image;
    StageSettings adapter;
    StageSettings temporal;
    StagesConfig();
};

struct PipelineConfig {
    DataConfig data;
    CodecSection codec;
    FeatureSection feature_net;
    BackboneConfig backbone;
    int content_hidden = 32;  // width of the content encoder's conv blocks
    std::vector<ControlKind> adapters{ControlKind::edge, ControlKind::depth, ControlKind::segmentation};
    DiffusionConfig diffusion;
    LossWeights losses;
    DiscriminatorConfig discriminator;
    StagesConfig stage;

    /// Checks every section and the cross-section widths.
    void validate() const;
    ConditioningConfig conditioning() const;
    AdapterConfig adapter(ControlKind kind) const;
    NoiseSchedule schedule() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing keys keep their defaults; unknown top-level sections are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace hicast
