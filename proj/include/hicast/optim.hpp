// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hicast/params.hpp"

namespace hicast {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Global gradient-norm clip; <= 0 disables clipping.
    double clip_norm = 1.0;
};

/// Adaptive-moment optimizer over a fixed list of named parameters.
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Var>> params, AdamConfig cfg);

    /// Applies one update from the accumulated gradients, then clears them.
    /// Returns the global gradient norm before clipping.
    double step();

    long steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    /// Moments keyed "m/<name>" and "v/<name>", plus "t".
    std::map<std::string, Tensor> state() const;
    void load_state(const std::map<std::string, Tensor>& state);

private:
    std::vector<std::pair<std::string, Var>> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace hicast
