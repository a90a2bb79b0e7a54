// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "hicast/ops.hpp"
#include "hicast/params.hpp"

namespace hicast::nn {

struct Conv2d {
    Var weight;
    Var bias;
    int stride = 1;
    int pad = 0;

    Conv2d() = default;
    /// zero_init leaves both weight and bias at zero.
    Conv2d(ParamSet& ps, const std::string& name, int in, int out, int kernel, int stride, Rng& rng,
           bool zero_init = false);
    Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
};

struct Linear {
    Var weight;
    Var bias;

    Linear() = default;
    Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng, bool zero_init = false);
    Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
};

struct GroupNorm {
    Var gamma;
    Var beta;
    int groups = 1;

    GroupNorm() = default;
    GroupNorm(ParamSet& ps, const std::string& name, int channels, int groups);
    Var operator()(const Var& x) const { return ops::group_norm(x, groups, gamma, beta); }
};

/// Largest group count <= preferred that divides channels.
int norm_groups(int channels, int preferred = 8);

}  // namespace hicast::nn
