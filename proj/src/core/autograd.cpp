// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/autograd.hpp"

#include <unordered_set>

#include "hicast/errors.hpp"

namespace hicast::ag {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor* Node::parent_grad(std::size_t i) {
    Node& p = *parents[i];
    if (!p.requires_grad) return nullptr;
    if (p.grad.empty()) p.grad = Tensor(p.value.shape());
    return &p.grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const Var& p : parents) any = any || p.requires_grad();
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(parents.size());
            for (const Var& p : parents) node->parents.push_back(p.node());
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Var(std::move(node));
}

void backward(const Var& root) {
    if (!root) throw ArgumentError("backward on an empty variable");
    if (root.numel() != 1) throw ArgumentError("backward requires a one-element root, got " + shape_str(root.shape()));
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    Node& r = *root.node();
    if (r.grad.empty()) r.grad = Tensor(r.value.shape());
    r.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) {
            n->backward_fn(*n);
        }
        // Interior gradients are not needed once propagated.
        if (n->backward_fn) {
            n->backward_fn = nullptr;
            n->grad = Tensor();
        }
    }
}

}  // namespace hicast::ag
