// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/params.hpp"

#include <algorithm>
#include <cmath>

#include "hicast/errors.hpp"
#include "hicast/layers.hpp"

namespace hicast {

void round_to_f32(Tensor& t) {
    for (double& v : t.storage()) v = static_cast<double>(static_cast<float>(v));
}

Var ParamSet::add(const std::string& name, Tensor init) {
    const std::string full = prefix_ + name;
    if (index_.count(full)) throw ArgumentError("duplicate parameter name " + full);
    round_to_f32(init);
    Var v(std::move(init), true);
    index_[full] = items_.size();
    items_.emplace_back(full, v);
    return v;
}

Var ParamSet::get(const std::string& full_name) const {
    auto it = index_.find(full_name);
    if (it == index_.end()) throw ArgumentError("unknown parameter " + full_name);
    return items_[it->second].second;
}

bool ParamSet::contains(const std::string& full_name) const { return index_.count(full_name) > 0; }

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : items_) n += v.numel();
    return n;
}

void ParamSet::set_trainable(bool on) {
    for (auto& [name, v] : items_) v.set_requires_grad(on);
}

void ParamSet::set_trainable_matching(const std::string& name_prefix, bool on) {
    for (auto& [name, v] : items_)
        if (name.rfind(name_prefix, 0) == 0) v.set_requires_grad(on);
}

std::vector<std::pair<std::string, Var>> ParamSet::trainable() const {
    std::vector<std::pair<std::string, Var>> out;
    for (const auto& item : items_)
        if (item.second.requires_grad()) out.push_back(item);
    return out;
}

void ParamSet::zero_grad() {
    for (auto& [name, v] : items_) v.zero_grad();
}

std::map<std::string, Tensor> ParamSet::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : items_) out.emplace(name, v.value());
    return out;
}

void ParamSet::load(const std::map<std::string, Tensor>& values) {
    for (auto& [name, v] : items_) {
        auto it = values.find(name);
        if (it == values.end()) throw FormatError("checkpoint is missing parameter " + name);
        if (it->second.shape() != v.shape()) {
            throw FormatError("parameter " + name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                              shape_str(v.shape()));
        }
        v.mutable_value() = it->second;
    }
}

std::size_t ParamSet::copy_from(const ParamSet& other) {
    std::size_t copied = 0;
    for (auto& [name, v] : items_) {
        if (!other.contains(name)) continue;
        const Var src = other.get(name);
        if (src.shape() != v.shape()) throw ArgumentError("shape mismatch copying parameter " + name);
        v.mutable_value() = src.value();
        ++copied;
    }
    return copied;
}

std::vector<std::string> changed_parameters(const std::map<std::string, Tensor>& before,
                                            const std::map<std::string, Tensor>& after) {
    std::vector<std::string> changed;
    for (const auto& [name, t] : after) {
        auto it = before.find(name);
        if (it == before.end() || !bit_equal(it->second, t)) changed.push_back(name);
    }
    return changed;
}

namespace init {

Tensor fan_in_normal(const Shape& shape, int fan_in, Rng& rng, double gain) {
    Tensor t = rng.normal_tensor(shape, gain / std::sqrt(static_cast<double>(std::max(1, fan_in))));
    round_to_f32(t);
    return t;
}

Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
Tensor ones(const Shape& shape) { return Tensor(shape, 1.0); }

}  // namespace init

namespace nn {

Conv2d::Conv2d(ParamSet& ps, const std::string& name, int in, int out, int kernel, int stride_, Rng& rng,
               bool zero_init)
    : stride(stride_), pad(kernel / 2) {
    const Shape ws{out, in, kernel, kernel};
    weight = ps.add(name + ".weight", zero_init ? init::zeros(ws) : init::fan_in_normal(ws, in * kernel * kernel, rng));
    bias = ps.add(name + ".bias", init::zeros({out}));
}

Linear::Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng, bool zero_init) {
    const Shape ws{out, in};
    weight = ps.add(name + ".weight", zero_init ? init::zeros(ws) : init::fan_in_normal(ws, in, rng));
    bias = ps.add(name + ".bias", init::zeros({out}));
}

GroupNorm::GroupNorm(ParamSet& ps, const std::string& name, int channels, int groups_) : groups(groups_) {
    gamma = ps.add(name + ".gamma", init::ones({channels}));
    beta = ps.add(name + ".beta", init::zeros({channels}));
}

int norm_groups(int channels, int preferred) {
    for (int g = std::min(preferred, channels); g > 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

}  // namespace nn

}  // namespace hicast
