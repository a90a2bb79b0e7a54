// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hicast/tensor.hpp"

namespace hicast::ag {

struct Node {
    Tensor value;
    Tensor grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer of parent i, allocated on demand, or nullptr if that
    /// parent does not take gradients.
    Tensor* parent_grad(std::size_t i);
};

using NodePtr = std::shared_ptr<Node>;

/// Handle to a node in the dynamic graph. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    /// Direct write access; only for leaves (parameters, inputs).
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    void zero_grad() { node_->grad = Tensor(); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    const Shape& shape() const { return node_->value.shape(); }
    int dim(int i) const { return node_->value.dim(i); }
    std::size_t numel() const { return node_->value.numel(); }

    const NodePtr& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

    /// Same value, cut from the graph.
    Var detach() const { return Var(node_->value, false); }

private:
    NodePtr node_;
};

bool grad_enabled();

/// Disables graph construction in the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an op result. The backward function is kept only if graph
/// construction is enabled and some parent requires gradients.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse-mode sweep from a scalar root; accumulates into leaf grads.
void backward(const Var& root);

}  // namespace hicast::ag
