// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hicast/ops.hpp"

namespace hicast {

using ag::Var;

struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas_bar;

    /// alpha_bar at t, with t = -1 meaning the clean end (1.0).
    double alpha_bar(int t) const;
};

/// Linear betas in [beta_start, beta_end]; alpha_bar accumulated in double.
NoiseSchedule make_schedule(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

Tensor q_sample(const NoiseSchedule& s, const Tensor& z0, int t, const Tensor& eps);
Tensor predict_x0(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int t);
/// Deterministic (eta = 0) update from t to t_prev; t_prev = -1 lands on x0.
Tensor ddim_step(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev);

/// Batched forms with one timestep per leading index.
Var q_sample(const NoiseSchedule& s, const Var& z0, const std::vector<int>& t, const Var& eps);
Var predict_x0(const NoiseSchedule& s, const Var& z_t, const Var& eps_hat, const std::vector<int>& t);

struct StyleScalingFactors {
    double wo = 1.0;  // full branch
    double wc = 0.0;  // style nulled
    double ws = 0.0;  // content nulled

    void validate() const;
};

Tensor cfg_combine(const Tensor& eps_full, const Tensor& eps_content_only, const Tensor& eps_style_only,
                   const StyleScalingFactors& w);

struct SamplerConfig {
    int steps = 20;
    double eta = 0.0;  // only 0 is supported
    std::uint64_t seed = 0;

    void validate(int T) const;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

/// Descending timesteps T-1, ..., spaced T/steps apart; the last step goes to -1.
std::vector<int> ddim_timesteps(int T, int steps);

enum class Branch { full, content_only, style_only };

/// eps prediction of one guidance branch at latent z_t and timestep t.
using BranchFn = std::function<Tensor(const Tensor& z_t, int t, Branch branch)>;

/// Starts from seeded Gaussian noise of the given shape and runs DDIM with the
/// three-branch guidance; branches with weight 0 are never evaluated.
Tensor sample(const NoiseSchedule& s, const BranchFn& eps, const Shape& shape, const StyleScalingFactors& w,
              const SamplerConfig& cfg);
/// Same chain from a caller-supplied starting latent.
Tensor sample_from(const NoiseSchedule& s, const BranchFn& eps, Tensor z_T, const StyleScalingFactors& w,
                   const SamplerConfig& cfg);

}  // namespace hicast
