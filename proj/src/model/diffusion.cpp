// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/diffusion.hpp"

#include <cmath>

#include "hicast/errors.hpp"
#include "hicast/ops.hpp"
#include "hicast/rng.hpp"

namespace hicast {

double NoiseSchedule::alpha_bar(int t) const {
    if (t == -1) return 1.0;
    if (t < 0 || t >= T) throw ArgumentError("timestep " + std::to_string(t) + " outside [0," + std::to_string(T) + ")");
    return alphas_bar[t];
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule length must be positive");
    if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0))
        throw ConfigError("need 0 < beta_start < beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (T - 1);
        s.betas.push_back(b);
        prod *= 1.0 - b;
        s.alphas_bar.push_back(prod);
    }
    return s;
}

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ArgumentError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

}  // namespace

Tensor q_sample(const NoiseSchedule& s, const Tensor& z0, int t, const Tensor& eps) {
    same_shape(z0, eps, "q_sample");
    const double ab = s.alpha_bar(t);
    return axpby(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

Tensor predict_x0(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int t) {
    same_shape(z_t, eps_hat, "predict_x0");
    const double ab = s.alpha_bar(t);
    Tensor out(z_t.shape());
    const double se = std::sqrt(1.0 - ab), sa = std::sqrt(ab);
    for (std::size_t i = 0; i < z_t.numel(); ++i) out[i] = (z_t[i] - se * eps_hat[i]) / sa;
    return out;
}

Tensor ddim_step(const NoiseSchedule& s, const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev) {
    if (t_prev == t) return z_t;
    const double ab = s.alpha_bar(t_prev);
    return axpby(std::sqrt(ab), predict_x0(s, z_t, eps_hat, t), std::sqrt(1.0 - ab), eps_hat);
}

Var q_sample(const NoiseSchedule& s, const Var& z0, const std::vector<int>& t, const Var& eps) {
    if (static_cast<int>(t.size()) != z0.dim(0)) throw ArgumentError("q_sample: one timestep per sample required");
    std::vector<double> a, b;
    for (int ti : t) {
        a.push_back(std::sqrt(s.alpha_bar(ti)));
        b.push_back(std::sqrt(1.0 - s.alpha_bar(ti)));
    }
    return ops::add(ops::scale_per_sample(z0, a), ops::scale_per_sample(eps, b));
}

Var predict_x0(const NoiseSchedule& s, const Var& z_t, const Var& eps_hat, const std::vector<int>& t) {
    if (static_cast<int>(t.size()) != z_t.dim(0)) throw ArgumentError("predict_x0: one timestep per sample required");
    std::vector<double> a, b;
    for (int ti : t) {
        const double ab = s.alpha_bar(ti);
        a.push_back(1.0 / std::sqrt(ab));
        b.push_back(-std::sqrt(1.0 - ab) / std::sqrt(ab));
    }
    return ops::add(ops::scale_per_sample(z_t, a), ops::scale_per_sample(eps_hat, b));
}

void StyleScalingFactors::validate() const {
    if (!std::isfinite(wo) || !std::isfinite(wc) || !std::isfinite(ws))
        throw ArgumentError("style scaling factors must be finite");
    if (std::abs(wo + wc + ws - 1.0) >= 1e-9)
        throw ArgumentError("style scaling factors must satisfy wo + wc + ws = 1 (got " +
                            std::to_string(wo + wc + ws) + ")");
}

Tensor cfg_combine(const Tensor& eps_full, const Tensor& eps_content_only, const Tensor& eps_style_only,
                   const StyleScalingFactors& w) {
    w.validate();
    Tensor out(eps_full.shape());
    auto add = [&](const Tensor& e, double k) {
        if (k == 0.0) return;
        same_shape(eps_full, e, "cfg_combine");
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += k * e[i];
    };
    add(eps_full, w.wo);
    add(eps_content_only, w.wc);
    add(eps_style_only, w.ws);
    return out;
}

void SamplerConfig::validate(int T) const {
    if (steps < 1 || steps > T)
        throw ConfigError("sampler steps must lie in [1," + std::to_string(T) + "], got " + std::to_string(steps));
    if (eta != 0.0) throw ConfigError("only deterministic sampling (eta = 0) is supported");
}

void to_json(nlohmann::json& j, const SamplerConfig& c) { j = {{"steps", c.steps}, {"eta", c.eta}, {"seed", c.seed}}; }

void from_json(const nlohmann::json& j, SamplerConfig& c) {
    c.steps = j.value("steps", c.steps);
    c.eta = j.value("eta", c.eta);
    c.seed = j.value("seed", c.seed);
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw ConfigError("sampler steps out of range");
    std::vector<int> ts;
    for (int i = 0; i < steps; ++i)
        ts.push_back(static_cast<int>(std::llround(T - static_cast<double>(i) * T / steps)) - 1);
    return ts;
}

Tensor sample_from(const NoiseSchedule& s, const BranchFn& eps, Tensor z, const StyleScalingFactors& w,
                   const SamplerConfig& cfg) {
    w.validate();
    cfg.validate(s.T);
    const std::vector<int> ts = ddim_timesteps(s.T, cfg.steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const int t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
        const Tensor full = w.wo != 0.0 ? eps(z, t, Branch::full) : Tensor();
        const Tensor c_only = w.wc != 0.0 ? eps(z, t, Branch::content_only) : Tensor();
        const Tensor s_only = w.ws != 0.0 ? eps(z, t, Branch::style_only) : Tensor();
        const Tensor& ref = w.wo != 0.0 ? full : (w.wc != 0.0 ? c_only : s_only);
        Tensor e = cfg_combine(full.empty() ? Tensor(ref.shape()) : full, c_only, s_only, w);
        if (!e.all_finite()) throw NumericError("non-finite noise prediction at t=" + std::to_string(t));
        z = ddim_step(s, z, e, t, t_prev);
    }
    return z;
}

Tensor sample(const NoiseSchedule& s, const BranchFn& eps, const Shape& shape, const StyleScalingFactors& w,
              const SamplerConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "sample-noise"));
    return sample_from(s, eps, rng.normal_tensor(shape), w, cfg);
}

}  // namespace hicast
