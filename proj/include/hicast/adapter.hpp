// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/backbone.hpp"
#include "hicast/image.hpp"

namespace hicast {

struct AdapterConfig {
    ControlKind kind = ControlKind::edge;
    int factor = 4;             // control-map pixels per latent cell
    std::vector<int> channels;  // backbone encoder channels, one per level

    void validate() const;
};

void to_json(nlohmann::json& j, const AdapterConfig& c);
void from_json(const nlohmann::json& j, AdapterConfig& c);

/// Maps a 1-channel control map to one additive tensor per backbone encoder
/// level: pixel-unshuffle to latent resolution, then per level conv (stride 2
/// past the first level), a residual block and a zero-initialized 1x1
/// projection.
class StyleAdapter {
public:
    StyleAdapter(AdapterConfig cfg, std::uint64_t seed);

    const AdapterConfig& config() const { return cfg_; }
    ControlKind kind() const { return cfg_.kind; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    /// maps [B, 1, H, W] -> level k [B, C_k, H/(f 2^k), W/(f 2^k)].
    AdapterPyramid forward(const Var& maps) const;
    /// Single map -> pyramid with batch 1.
    AdapterPyramid forward(const ControlMap& map) const;

    void save(const std::filesystem::path& dir, long step = 0, const nlohmann::json& extra = {}) const;
    static StyleAdapter load(const std::filesystem::path& dir);

private:
    struct Level {
        nn::Conv2d in;
        nn::Conv2d res0, res1;
        nn::Conv2d proj;
    };

    AdapterConfig cfg_;
    std::uint64_t seed_;
    ParamSet params_;
    std::vector<Level> levels_;
};

/// Levelwise sum of w_j * P_j. An empty list gives an empty pyramid, which
/// the backbone treats as all zeros.
AdapterPyramid combine(const std::vector<std::pair<AdapterPyramid, double>>& pyramids);

/// Repeats every level of a batch-1 pyramid n times along the batch axis.
AdapterPyramid repeat_batch(const AdapterPyramid& p, int n);

}  // namespace hicast
