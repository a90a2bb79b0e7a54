// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/optim.hpp"

#include <cmath>

#include "hicast/errors.hpp"

namespace hicast {

Adam::Adam(std::vector<std::pair<std::string, Var>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& [name, v] : params_) {
        m_.emplace_back(v.shape());
        v_.emplace_back(v.shape());
    }
}

double Adam::step() {
    double sq = 0.0;
    for (const auto& [name, v] : params_)
        if (v.has_grad())
            for (double g : v.grad().storage()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Var& p = params_[k].second;
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        Tensor& w = p.mutable_value();
        const bool has = p.has_grad();
        for (std::size_t i = 0; i < w.numel(); ++i) {
            const double g = has ? p.grad()[i] * clip : 0.0;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        round_to_f32(w);
        round_to_f32(m);
        round_to_f32(v);
        p.zero_grad();
    }
    return norm;
}

std::map<std::string, Tensor> Adam::state() const {
    std::map<std::string, Tensor> out;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        out.emplace("m/" + params_[k].first, m_[k]);
        out.emplace("v/" + params_[k].first, v_[k]);
    }
    // Step counts stay far below 2^24, so float32 holds them exactly.
    out.emplace("t", Tensor({1}, {static_cast<double>(t_)}));
    return out;
}

void Adam::load_state(const std::map<std::string, Tensor>& state) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto m = state.find("m/" + params_[k].first);
        auto v = state.find("v/" + params_[k].first);
        if (m == state.end() || v == state.end()) throw FormatError("optimizer state missing " + params_[k].first);
        if (m->second.shape() != m_[k].shape() || v->second.shape() != v_[k].shape())
            throw FormatError("optimizer state shape mismatch for " + params_[k].first);
        m_[k] = m->second;
        v_[k] = v->second;
    }
    auto t = state.find("t");
    if (t == state.end()) throw FormatError("optimizer state missing step count");
    t_ = static_cast<long>(t->second[0]);
}

}  // namespace hicast
