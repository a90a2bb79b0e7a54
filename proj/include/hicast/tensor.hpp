// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hicast {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Value semantics; copies are deep.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    /// Size of dimension i; negative i counts from the back.
    int dim(int i) const;
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::initializer_list<int> idx);
    double at(std::initializer_list<int> idx) const;

    /// Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double v);

    bool all_finite() const;
    double sum() const;
    double mean() const;
    double max_abs() const;

private:
    std::size_t offset(std::initializer_list<int> idx) const;

    Shape shape_;
    std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

/// Element-wise helpers on plain tensors (no autograd).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
Tensor& operator+=(Tensor& a, const Tensor& b);

/// Slice [start, start+count) along the leading dimension.
Tensor slice_leading(const Tensor& t, int start, int count);
/// Concatenate along the leading dimension.
Tensor concat_leading(const std::vector<Tensor>& parts);
/// Stack equally shaped tensors under a new leading dimension.
Tensor stack(const std::vector<Tensor>& parts);

}  // namespace hicast
