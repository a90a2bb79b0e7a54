// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hicast/errors.hpp"

namespace hicast {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ArgumentError("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ArgumentError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                            shape_str(shape_));
    }
}

int Tensor::dim(int i) const {
    const int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw ArgumentError("dimension index out of range for shape " + shape_str(shape_));
    return shape_[static_cast<std::size_t>(i)];
}

std::size_t Tensor::offset(std::initializer_list<int> idx) const {
    if (idx.size() != shape_.size()) throw ArgumentError("index rank mismatch for shape " + shape_str(shape_));
    std::size_t off = 0;
    std::size_t d = 0;
    for (int i : idx) {
        if (i < 0 || i >= shape_[d]) throw ArgumentError("index out of range for shape " + shape_str(shape_));
        off = off * static_cast<std::size_t>(shape_[d]) + static_cast<std::size_t>(i);
        ++d;
    }
    return off;
}

double& Tensor::at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
double Tensor::at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw ArgumentError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size()); }

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ArgumentError("shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out += b;
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ArgumentError("shape mismatch in tensor subtraction");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
    return out;
}

Tensor operator*(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.storage()) v *= s;
    return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ArgumentError("shape mismatch in tensor addition");
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
    return a;
}

Tensor slice_leading(const Tensor& t, int start, int count) {
    if (t.rank() == 0 || start < 0 || count < 0 || start + count > t.dim(0)) {
        throw ArgumentError("leading slice out of range for shape " + shape_str(t.shape()));
    }
    Shape s = t.shape();
    const std::size_t inner = t.numel() / static_cast<std::size_t>(s[0]);
    s[0] = count;
    std::vector<double> data(t.data() + inner * start, t.data() + inner * (start + count));
    return Tensor(std::move(s), std::move(data));
}

Tensor concat_leading(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat of zero tensors");
    Shape s = parts.front().shape();
    int lead = 0;
    std::vector<double> data;
    for (const Tensor& p : parts) {
        Shape ps = p.shape();
        if (ps.size() != s.size() || !std::equal(ps.begin() + 1, ps.end(), s.begin() + 1)) {
            throw ArgumentError("concat shape mismatch " + shape_str(ps) + " vs " + shape_str(s));
        }
        lead += ps[0];
        data.insert(data.end(), p.storage().begin(), p.storage().end());
    }
    s[0] = lead;
    return Tensor(std::move(s), std::move(data));
}

Tensor stack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("stack of zero tensors");
    Shape s = parts.front().shape();
    std::vector<double> data;
    data.reserve(parts.size() * parts.front().numel());
    for (const Tensor& p : parts) {
        if (p.shape() != s) throw ArgumentError("stack shape mismatch");
        data.insert(data.end(), p.storage().begin(), p.storage().end());
    }
    s.insert(s.begin(), static_cast<int>(parts.size()));
    return Tensor(std::move(s), std::move(data));
}

}  // namespace hicast
