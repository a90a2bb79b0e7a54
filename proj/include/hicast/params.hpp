// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hicast/autograd.hpp"
#include "hicast/rng.hpp"

namespace hicast {

using ag::Var;

/// Round every element to the nearest float32 value. Parameters and optimizer
/// state are kept float32-representable so checkpoints are lossless.
void round_to_f32(Tensor& t);

/// Named, insertion-ordered collection of leaf variables owned by one model
/// component. Trainability is the requires_grad flag of each leaf.
class ParamSet {
public:
    explicit ParamSet(std::string prefix = {}) : prefix_(std::move(prefix)) {}

    /// Registers a parameter under prefix + name.
    Var add(const std::string& name, Tensor init);

    Var get(const std::string& full_name) const;
    bool contains(const std::string& full_name) const;
    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
    const std::string& prefix() const { return prefix_; }
    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;

    void set_trainable(bool on);
    /// Toggle parameters whose full name starts with `name_prefix`.
    void set_trainable_matching(const std::string& name_prefix, bool on);
    std::vector<std::pair<std::string, Var>> trainable() const;
    void zero_grad();

    std::map<std::string, Tensor> snapshot() const;
    /// Overwrites values from a snapshot; every parameter must be present with a matching shape.
    void load(const std::map<std::string, Tensor>& values);
    /// Copies values for the names both sets share; returns the number copied.
    std::size_t copy_from(const ParamSet& other);

private:
    std::string prefix_;
    std::vector<std::pair<std::string, Var>> items_;
    std::map<std::string, std::size_t> index_;
};

/// Names of parameters whose values differ between two snapshots.
std::vector<std::string> changed_parameters(const std::map<std::string, Tensor>& before,
                                            const std::map<std::string, Tensor>& after);

namespace init {
/// N(0, gain^2 / fan_in), rounded to float32.
Tensor fan_in_normal(const Shape& shape, int fan_in, Rng& rng, double gain = 1.0);
Tensor zeros(const Shape& shape);
Tensor ones(const Shape& shape);
}  // namespace init

}  // namespace hicast
