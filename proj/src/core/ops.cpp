// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "hicast/errors.hpp"
#include "hicast/kernels.hpp"

namespace hicast::ops {

using ag::make_result;
using ag::Node;

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ArgumentError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    }
}

void require_rank(const Var& a, int rank, const char* op) {
    if (a.value().rank() != rank) {
        throw ArgumentError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                            shape_str(a.shape()));
    }
}

const Tensor& pval(Node& n, std::size_t i) { return n.parents[i]->value; }

// Product of dims after the first two.
std::size_t spatial_size(const Shape& s) {
    std::size_t p = 1;
    for (std::size_t i = 2; i < s.size(); ++i) p *= static_cast<std::size_t>(s[i]);
    return p;
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    Tensor y(a.shape());
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
    return make_result(std::move(y), {a}, [deriv](Node& n) {
        if (Tensor* g = n.parent_grad(0)) {
            const Tensor& x = pval(n, 0);
            for (std::size_t i = 0; i < x.numel(); ++i) (*g)[i] += n.grad[i] * deriv(x[i], n.value[i]);
        }
    });
}

double sigmoid_of(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
        for (std::size_t k = 0; k < 2; ++k)
            if (Tensor* g = n.parent_grad(k)) *g += n.grad;
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
        if (Tensor* g = n.parent_grad(0)) *g += n.grad;
        if (Tensor* g = n.parent_grad(1))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= n.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b.value()[i];
    return make_result(std::move(y), {a, b}, [](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += n.grad[i] * pval(n, 1)[i];
        if (Tensor* g = n.parent_grad(1))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += n.grad[i] * pval(n, 0)[i];
    });
}

Var scale(const Var& a, double s) {
    return make_result(a.value() * s, {a}, [s](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += s * n.grad[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor y = a.value();
    for (double& v : y.storage()) v += s;
    return make_result(std::move(y), {a}, [](Node& n) {
        if (Tensor* g = n.parent_grad(0)) *g += n.grad;
    });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var silu(const Var& a) {
    return unary(
        a, [](double x) { return x * sigmoid_of(x); },
        [](double x, double) {
            const double s = sigmoid_of(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Var sigmoid(const Var& a) {
    return unary(a, sigmoid_of, [](double, double y) { return y * (1.0 - y); });
}

Var clamp(const Var& a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var log_sigmoid(const Var& a) {
    return unary(
        a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return sigmoid_of(-x); });
}

Var sqrt_eps(const Var& a, double eps) {
    return unary(
        a, [eps](double x) { return std::sqrt(x + eps); }, [](double, double y) { return 0.5 / y; });
}

Var mul_scalar_var(const Var& a, const Var& s) {
    if (s.numel() != 1) throw ArgumentError("mul_scalar_var: scale must have one element");
    const double sv = s.value()[0];
    return make_result(a.value() * sv, {a, s}, [](Node& n) {
        const double sv = pval(n, 1)[0];
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += sv * n.grad[i];
        if (Tensor* g = n.parent_grad(1)) {
            double acc = 0.0;
            const Tensor& x = pval(n, 0);
            for (std::size_t i = 0; i < x.numel(); ++i) acc += n.grad[i] * x[i];
            (*g)[0] += acc;
        }
    });
}

Var sum(const Var& a) {
    return make_result(Tensor({1}, {a.value().sum()}), {a}, [](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (double& v : g->storage()) v += n.grad[0];
    });
}

Var mean(const Var& a) {
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, a.numel()));
    return make_result(Tensor({1}, {a.value().sum() * inv}), {a}, [inv](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (double& v : g->storage()) v += n.grad[0] * inv;
    });
}

Var mean_square(const Var& a) {
    const Tensor& x = a.value();
    double s = 0.0;
    for (double v : x.storage()) s += v * v;
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, x.numel()));
    return make_result(Tensor({1}, {s * inv}), {a}, [inv](Node& n) {
        if (Tensor* g = n.parent_grad(0)) {
            const Tensor& x = pval(n, 0);
            for (std::size_t i = 0; i < x.numel(); ++i) (*g)[i] += n.grad[0] * 2.0 * x[i] * inv;
        }
    });
}

Var rms(const Var& a) {
    const Tensor& x = a.value();
    double s = 0.0;
    for (double v : x.storage()) s += v * v;
    const double count = static_cast<double>(std::max<std::size_t>(1, x.numel()));
    const double r = std::sqrt(s / count);
    return make_result(Tensor({1}, {r}), {a}, [count](Node& n) {
        const double r = n.value[0];
        if (r == 0.0) return;
        if (Tensor* g = n.parent_grad(0)) {
            const Tensor& x = pval(n, 0);
            const double k = n.grad[0] / (count * r);
            for (std::size_t i = 0; i < x.numel(); ++i) (*g)[i] += k * x[i];
        }
    });
}

Var add_channel_bias(const Var& x, const Var& b) {
    if (x.value().rank() < 2 || b.value().rank() != 1 || b.dim(0) != x.dim(1)) {
        throw ArgumentError("add_channel_bias: shapes " + shape_str(x.shape()) + " and " + shape_str(b.shape()));
    }
    const int nb = x.dim(0);
    const int c = x.dim(1);
    const std::size_t sp = spatial_size(x.shape());
    Tensor y = x.value();
    for (int i = 0; i < nb; ++i)
        for (int ch = 0; ch < c; ++ch) {
            double* p = y.data() + (static_cast<std::size_t>(i) * c + ch) * sp;
            for (std::size_t j = 0; j < sp; ++j) p[j] += b.value()[ch];
        }
    return make_result(std::move(y), {x, b}, [nb, c, sp](Node& n) {
        if (Tensor* g = n.parent_grad(0)) *g += n.grad;
        if (Tensor* g = n.parent_grad(1))
            for (int i = 0; i < nb; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const double* p = n.grad.data() + (static_cast<std::size_t>(i) * c + ch) * sp;
                    double s = 0.0;
                    for (std::size_t j = 0; j < sp; ++j) s += p[j];
                    (*g)[ch] += s;
                }
    });
}

Var add_row_vector(const Var& x, const Var& v) { return add_channel_bias(x, v); }

Var add_per_sample_channel(const Var& x, const Var& e) {
    if (x.value().rank() < 2 || e.value().rank() != 2 || e.dim(0) != x.dim(0) || e.dim(1) != x.dim(1)) {
        throw ArgumentError("add_per_sample_channel: shapes " + shape_str(x.shape()) + " and " +
                            shape_str(e.shape()));
    }
    const std::size_t rows = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    const std::size_t sp = spatial_size(x.shape());
    Tensor y = x.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < sp; ++j) y[r * sp + j] += e.value()[r];
    return make_result(std::move(y), {x, e}, [rows, sp](Node& n) {
        if (Tensor* g = n.parent_grad(0)) *g += n.grad;
        if (Tensor* g = n.parent_grad(1))
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < sp; ++j) s += n.grad[r * sp + j];
                (*g)[r] += s;
            }
    });
}

Var mul_per_sample_channel(const Var& x, const Var& s) {
    if (x.value().rank() < 2 || s.value().rank() != 2 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1)) {
        throw ArgumentError("mul_per_sample_channel: shapes " + shape_str(x.shape()) + " and " +
                            shape_str(s.shape()));
    }
    const std::size_t rows = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    const std::size_t sp = spatial_size(x.shape());
    Tensor y = x.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < sp; ++j) y[r * sp + j] *= s.value()[r];
    return make_result(std::move(y), {x, s}, [rows, sp](Node& n) {
        const Tensor& xv = pval(n, 0);
        const Tensor& sv = pval(n, 1);
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < sp; ++j) (*g)[r * sp + j] += n.grad[r * sp + j] * sv[r];
        if (Tensor* g = n.parent_grad(1))
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (std::size_t j = 0; j < sp; ++j) acc += n.grad[r * sp + j] * xv[r * sp + j];
                (*g)[r] += acc;
            }
    });
}

Var scale_per_sample(const Var& x, const std::vector<double>& coeffs) {
    if (x.value().rank() < 1 || static_cast<int>(coeffs.size()) != x.dim(0)) {
        throw ArgumentError("scale_per_sample: coefficient count does not match batch");
    }
    const std::size_t inner = x.numel() / coeffs.size();
    Tensor y = x.value();
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        for (std::size_t j = 0; j < inner; ++j) y[i * inner + j] *= coeffs[i];
    return make_result(std::move(y), {x}, [coeffs, inner](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t i = 0; i < coeffs.size(); ++i)
                for (std::size_t j = 0; j < inner; ++j) (*g)[i * inner + j] += n.grad[i * inner + j] * coeffs[i];
    });
}

Var broadcast_rows(const Var& v, int rows) {
    require_rank(v, 1, "broadcast_rows");
    const int d = v.dim(0);
    Tensor y({rows, d});
    for (int r = 0; r < rows; ++r) std::copy_n(v.value().data(), d, y.data() + static_cast<std::size_t>(r) * d);
    return make_result(std::move(y), {v}, [rows, d](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) (*g)[j] += n.grad[static_cast<std::size_t>(r) * d + j];
    });
}

Var broadcast_map(const Var& v, int nb, int h, int w) {
    require_rank(v, 1, "broadcast_map");
    const int c = v.dim(0);
    const std::size_t sp = static_cast<std::size_t>(h) * w;
    Tensor y({nb, c, h, w});
    for (int i = 0; i < nb; ++i)
        for (int ch = 0; ch < c; ++ch)
            std::fill_n(y.data() + (static_cast<std::size_t>(i) * c + ch) * sp, sp, v.value()[ch]);
    return make_result(std::move(y), {v}, [nb, c, sp](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int i = 0; i < nb; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const double* p = n.grad.data() + (static_cast<std::size_t>(i) * c + ch) * sp;
                    double s = 0.0;
                    for (std::size_t j = 0; j < sp; ++j) s += p[j];
                    (*g)[ch] += s;
                }
    });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
    require_rank(x, 4, "conv2d input");
    require_rank(w, 4, "conv2d weight");
    if (w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3)) {
        throw ArgumentError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                            shape_str(x.shape()));
    }
    if (bias && (bias.value().rank() != 1 || bias.dim(0) != w.dim(0))) {
        throw ArgumentError("conv2d: bias shape " + shape_str(bias.shape()));
    }
    kernels::ConvGeom g;
    g.batch = x.dim(0);
    g.in_channels = x.dim(1);
    g.height = x.dim(2);
    g.width = x.dim(3);
    g.out_channels = w.dim(0);
    g.kernel = w.dim(2);
    g.stride = stride;
    g.pad = pad;
    if (g.out_height() <= 0 || g.out_width() <= 0) throw ArgumentError("conv2d: empty output");
    Tensor y({g.batch, g.out_channels, g.out_height(), g.out_width()});
    kernels::conv2d_forward(g, x.value().data(), w.value().data(), bias ? bias.value().data() : nullptr, y.data());
    std::vector<Var> parents{x, w};
    if (bias) parents.push_back(bias);
    const bool has_bias = static_cast<bool>(bias);
    return make_result(std::move(y), std::move(parents), [g, has_bias](Node& n) {
        if (Tensor* gx = n.parent_grad(0)) kernels::conv2d_backward_input(g, n.grad.data(), pval(n, 1).data(), gx->data());
        Tensor* gw = n.parent_grad(1);
        Tensor* gb = has_bias ? n.parent_grad(2) : nullptr;
        if (gw) {
            kernels::conv2d_backward_weight(g, pval(n, 0).data(), n.grad.data(), gw->data(), gb ? gb->data() : nullptr);
        } else if (gb) {
            const int hw = g.out_height() * g.out_width();
            for (int i = 0; i < g.batch; ++i)
                for (int co = 0; co < g.out_channels; ++co) {
                    const double* p = n.grad.data() + (static_cast<std::size_t>(i) * g.out_channels + co) * hw;
                    double s = 0.0;
                    for (int j = 0; j < hw; ++j) s += p[j];
                    (*gb)[co] += s;
                }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    require_rank(x, 2, "linear input");
    require_rank(w, 2, "linear weight");
    if (w.dim(1) != x.dim(1)) {
        throw ArgumentError("linear: weight " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
    }
    const int rows = x.dim(0);
    const int in = x.dim(1);
    const int out = w.dim(0);
    Tensor y({rows, out});
    kernels::gemm(false, true, rows, out, in, 1.0, x.value().data(), in, w.value().data(), in, 0.0, y.data(), out);
    std::vector<Var> parents{x, w};
    if (b) {
        if (b.value().rank() != 1 || b.dim(0) != out) throw ArgumentError("linear: bias shape " + shape_str(b.shape()));
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < out; ++j) y[static_cast<std::size_t>(r) * out + j] += b.value()[j];
        parents.push_back(b);
    }
    const bool has_bias = static_cast<bool>(b);
    return make_result(std::move(y), std::move(parents), [rows, in, out, has_bias](Node& n) {
        if (Tensor* gx = n.parent_grad(0))
            kernels::gemm(false, false, rows, in, out, 1.0, n.grad.data(), out, pval(n, 1).data(), in, 1.0,
                          gx->data(), in);
        if (Tensor* gw = n.parent_grad(1))
            kernels::gemm(true, false, out, in, rows, 1.0, n.grad.data(), out, pval(n, 0).data(), in, 1.0,
                          gw->data(), in);
        if (has_bias)
            if (Tensor* gb = n.parent_grad(2))
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < out; ++j) (*gb)[j] += n.grad[static_cast<std::size_t>(r) * out + j];
    });
}

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps) {
    if (x.value().rank() < 2) throw ArgumentError("group_norm: input rank < 2");
    const int nb = x.dim(0);
    const int c = x.dim(1);
    if (groups <= 0 || c % groups != 0) {
        throw ArgumentError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                            std::to_string(groups) + " groups");
    }
    if (gamma.dim(0) != c || beta.dim(0) != c) throw ArgumentError("group_norm: affine parameter shape");
    const std::size_t sp = spatial_size(x.shape());
    const int cpg = c / groups;
    const std::size_t gsize = static_cast<std::size_t>(cpg) * sp;
    auto xhat = std::make_shared<Tensor>(x.shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(nb) * groups);
    Tensor y(x.shape());
    const Tensor& xv = x.value();
    for (int i = 0; i < nb; ++i)
        for (int gi = 0; gi < groups; ++gi) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(gi) * cpg) * sp;
            double m = 0.0;
            for (std::size_t j = 0; j < gsize; ++j) m += xv[base + j];
            m /= static_cast<double>(gsize);
            double v = 0.0;
            for (std::size_t j = 0; j < gsize; ++j) v += (xv[base + j] - m) * (xv[base + j] - m);
            v /= static_cast<double>(gsize);
            const double is = 1.0 / std::sqrt(v + eps);
            (*inv_std)[static_cast<std::size_t>(i) * groups + gi] = is;
            for (std::size_t j = 0; j < gsize; ++j) {
                const double h = (xv[base + j] - m) * is;
                (*xhat)[base + j] = h;
                const int ch = gi * cpg + static_cast<int>(j / sp);
                y[base + j] = h * gamma.value()[ch] + beta.value()[ch];
            }
        }
    return make_result(std::move(y), {x, gamma, beta}, [=](Node& n) {
        const Tensor& gam = pval(n, 1);
        Tensor* gx = n.parent_grad(0);
        Tensor* gg = n.parent_grad(1);
        Tensor* gbeta = n.parent_grad(2);
        for (int i = 0; i < nb; ++i)
            for (int gi = 0; gi < groups; ++gi) {
                const std::size_t base = (static_cast<std::size_t>(i) * c + static_cast<std::size_t>(gi) * cpg) * sp;
                double mean_d = 0.0;
                double mean_dx = 0.0;
                for (std::size_t j = 0; j < gsize; ++j) {
                    const int ch = gi * cpg + static_cast<int>(j / sp);
                    const double dy = n.grad[base + j];
                    const double h = (*xhat)[base + j];
                    if (gg) (*gg)[ch] += dy * h;
                    if (gbeta) (*gbeta)[ch] += dy;
                    const double d = dy * gam[ch];
                    mean_d += d;
                    mean_dx += d * h;
                }
                if (!gx) continue;
                mean_d /= static_cast<double>(gsize);
                mean_dx /= static_cast<double>(gsize);
                const double is = (*inv_std)[static_cast<std::size_t>(i) * groups + gi];
                for (std::size_t j = 0; j < gsize; ++j) {
                    const int ch = gi * cpg + static_cast<int>(j / sp);
                    const double d = n.grad[base + j] * gam[ch];
                    (*gx)[base + j] += is * (d - mean_d - (*xhat)[base + j] * mean_dx);
                }
            }
    });
}

Var avg_pool2(const Var& x) {
    require_rank(x, 4, "avg_pool2");
    const int nc = x.dim(0) * x.dim(1);
    const int h = x.dim(2);
    const int w = x.dim(3);
    if (h % 2 || w % 2) throw ArgumentError("avg_pool2: odd spatial size " + shape_str(x.shape()));
    const int ho = h / 2;
    const int wo = w / 2;
    Tensor y({x.dim(0), x.dim(1), ho, wo});
    const double* xv = x.value().data();
    for (int p = 0; p < nc; ++p)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const double* b = xv + (static_cast<std::size_t>(p) * h + 2 * oy) * w + 2 * ox;
                y[(static_cast<std::size_t>(p) * ho + oy) * wo + ox] = 0.25 * (b[0] + b[1] + b[w] + b[w + 1]);
            }
    return make_result(std::move(y), {x}, [nc, h, w, ho, wo](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int p = 0; p < nc; ++p)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const double d = 0.25 * n.grad[(static_cast<std::size_t>(p) * ho + oy) * wo + ox];
                        double* b = g->data() + (static_cast<std::size_t>(p) * h + 2 * oy) * w + 2 * ox;
                        b[0] += d;
                        b[1] += d;
                        b[w] += d;
                        b[w + 1] += d;
                    }
    });
}

Var upsample_nearest2(const Var& x) {
    require_rank(x, 4, "upsample_nearest2");
    const int nc = x.dim(0) * x.dim(1);
    const int h = x.dim(2);
    const int w = x.dim(3);
    Tensor y({x.dim(0), x.dim(1), 2 * h, 2 * w});
    const double* xv = x.value().data();
    for (int p = 0; p < nc; ++p)
        for (int oy = 0; oy < 2 * h; ++oy)
            for (int ox = 0; ox < 2 * w; ++ox)
                y[(static_cast<std::size_t>(p) * 2 * h + oy) * 2 * w + ox] =
                    xv[(static_cast<std::size_t>(p) * h + oy / 2) * w + ox / 2];
    return make_result(std::move(y), {x}, [nc, h, w](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int p = 0; p < nc; ++p)
                for (int oy = 0; oy < 2 * h; ++oy)
                    for (int ox = 0; ox < 2 * w; ++ox)
                        (*g)[(static_cast<std::size_t>(p) * h + oy / 2) * w + ox / 2] +=
                            n.grad[(static_cast<std::size_t>(p) * 2 * h + oy) * 2 * w + ox];
    });
}

Var pixel_unshuffle(const Var& x, int f) {
    require_rank(x, 4, "pixel_unshuffle");
    const int nb = x.dim(0);
    const int c = x.dim(1);
    const int h = x.dim(2);
    const int w = x.dim(3);
    if (f <= 0 || h % f || w % f) {
        throw ArgumentError("pixel_unshuffle: size " + shape_str(x.shape()) + " not divisible by " + std::to_string(f));
    }
    const int ho = h / f;
    const int wo = w / f;
    // out[n, (c*f + dy)*f + dx, oy, ox] = in[n, c, oy*f+dy, ox*f+dx]
    auto index_map = std::make_shared<std::vector<std::size_t>>(x.numel());
    Tensor y({nb, c * f * f, ho, wo});
    std::size_t o = 0;
    for (int i = 0; i < nb; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox, ++o) {
                            const std::size_t src =
                                ((static_cast<std::size_t>(i) * c + ch) * h + oy * f + dy) * w + ox * f + dx;
                            (*index_map)[o] = src;
                            y[o] = x.value()[src];
                        }
    return make_result(std::move(y), {x}, [index_map](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t o = 0; o < index_map->size(); ++o) (*g)[(*index_map)[o]] += n.grad[o];
    });
}

Var pixel_shuffle(const Var& x, int f) {
    require_rank(x, 4, "pixel_shuffle");
    const int nb = x.dim(0);
    if (f <= 0 || x.dim(1) % (f * f)) {
        throw ArgumentError("pixel_shuffle: channels of " + shape_str(x.shape()) + " not divisible by " +
                            std::to_string(f * f));
    }
    const int c = x.dim(1) / (f * f);
    const int h = x.dim(2);
    const int w = x.dim(3);
    // out[n, c, y*f+dy, x*f+dx] = in[n, (c*f + dy)*f + dx, y, x]
    auto index_map = std::make_shared<std::vector<std::size_t>>(x.numel());
    Tensor y({nb, c, h * f, w * f});
    std::size_t o = 0;
    for (int i = 0; i < nb; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < h * f; ++oy)
                for (int ox = 0; ox < w * f; ++ox, ++o) {
                    const int sc = (ch * f + oy % f) * f + ox % f;
                    const std::size_t src = ((static_cast<std::size_t>(i) * c * f * f + sc) * h + oy / f) * w + ox / f;
                    (*index_map)[o] = src;
                    y[o] = x.value()[src];
                }
    return make_result(std::move(y), {x}, [index_map](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t o = 0; o < index_map->size(); ++o) (*g)[(*index_map)[o]] += n.grad[o];
    });
}

Var global_avg_pool(const Var& x) {
    if (x.value().rank() < 2) throw ArgumentError("global_avg_pool: rank < 2");
    const std::size_t rows = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    const std::size_t sp = spatial_size(x.shape());
    Tensor y({x.dim(0), x.dim(1)});
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < sp; ++j) s += x.value()[r * sp + j];
        y[r] = s / static_cast<double>(sp);
    }
    return make_result(std::move(y), {x}, [rows, sp](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = n.grad[r] / static_cast<double>(sp);
                for (std::size_t j = 0; j < sp; ++j) (*g)[r * sp + j] += d;
            }
    });
}

Var channel_variance(const Var& x) {
    if (x.value().rank() < 2) throw ArgumentError("channel_variance: rank < 2");
    const std::size_t rows = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
    const std::size_t sp = spatial_size(x.shape());
    Tensor y({x.dim(0), x.dim(1)});
    auto means = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = x.value().data() + r * sp;
        double m = 0.0;
        for (std::size_t j = 0; j < sp; ++j) m += p[j];
        m /= static_cast<double>(sp);
        double v = 0.0;
        for (std::size_t j = 0; j < sp; ++j) v += (p[j] - m) * (p[j] - m);
        (*means)[r] = m;
        y[r] = v / static_cast<double>(sp);
    }
    return make_result(std::move(y), {x}, [rows, sp, means](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t r = 0; r < rows; ++r) {
                const double k = 2.0 * n.grad[r] / static_cast<double>(sp);
                const double* p = pval(n, 0).data() + r * sp;
                for (std::size_t j = 0; j < sp; ++j) (*g)[r * sp + j] += k * (p[j] - (*means)[r]);
            }
    });
}

Var patch_average(const Var& x, const std::vector<std::pair<int, int>>& corners, int size) {
    require_rank(x, 4, "patch_average");
    const int nb = x.dim(0);
    const int c = x.dim(1);
    const int h = x.dim(2);
    const int w = x.dim(3);
    for (auto [py, px] : corners) {
        if (py < 0 || px < 0 || py + size > h || px + size > w) throw ArgumentError("patch_average: patch out of bounds");
    }
    const int np = static_cast<int>(corners.size());
    const double inv = 1.0 / (static_cast<double>(size) * size);
    Tensor y({nb, np, c});
    for (int i = 0; i < nb; ++i)
        for (int p = 0; p < np; ++p)
            for (int ch = 0; ch < c; ++ch) {
                const double* plane = x.value().data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
                double s = 0.0;
                for (int yy = 0; yy < size; ++yy)
                    for (int xx = 0; xx < size; ++xx) s += plane[(corners[p].first + yy) * w + corners[p].second + xx];
                y[(static_cast<std::size_t>(i) * np + p) * c + ch] = s * inv;
            }
    return make_result(std::move(y), {x}, [=](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int i = 0; i < nb; ++i)
                for (int p = 0; p < np; ++p)
                    for (int ch = 0; ch < c; ++ch) {
                        const double d = n.grad[(static_cast<std::size_t>(i) * np + p) * c + ch] * inv;
                        double* plane = g->data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
                        for (int yy = 0; yy < size; ++yy)
                            for (int xx = 0; xx < size; ++xx)
                                plane[(corners[p].first + yy) * w + corners[p].second + xx] += d;
                    }
    });
}

Var crop_windows(const Var& x, const std::vector<Window>& windows, int size) {
    require_rank(x, 4, "crop_windows");
    const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (size < 1) throw ArgumentError("crop_windows: size must be positive");
    for (const Window& win : windows)
        if (win.sample < 0 || win.sample >= nb || win.y < 0 || win.x < 0 || win.y + size > h || win.x + size > w)
            throw ArgumentError("crop_windows: window out of bounds");
    const int nw = static_cast<int>(windows.size());
    Tensor y({nw, c, size, size});
    auto src = [=](const Window& win, int ch, int yy) {
        return (static_cast<std::size_t>(win.sample) * c + ch) * h * w + static_cast<std::size_t>(win.y + yy) * w + win.x;
    };
    for (int k = 0; k < nw; ++k)
        for (int ch = 0; ch < c; ++ch)
            for (int yy = 0; yy < size; ++yy)
                std::copy_n(x.value().data() + src(windows[k], ch, yy), size,
                            y.data() + ((static_cast<std::size_t>(k) * c + ch) * size + yy) * size);
    return make_result(std::move(y), {x}, [=](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (int k = 0; k < nw; ++k)
                for (int ch = 0; ch < c; ++ch)
                    for (int yy = 0; yy < size; ++yy) {
                        const double* d = n.grad.data() + ((static_cast<std::size_t>(k) * c + ch) * size + yy) * size;
                        double* o = g->data() + src(windows[k], ch, yy);
                        for (int xx = 0; xx < size; ++xx) o[xx] += d[xx];
                    }
    });
}

Var l2_normalize_rows(const Var& x, double eps) {
    const int d = x.dim(-1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    Tensor y(x.shape());
    auto norms = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = x.value().data() + r * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += p[j] * p[j];
        const double nrm = std::max(std::sqrt(s), eps);
        (*norms)[r] = nrm;
        for (int j = 0; j < d; ++j) y[r * d + j] = p[j] / nrm;
    }
    return make_result(std::move(y), {x}, [rows, d, eps, norms](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t r = 0; r < rows; ++r) {
                const double nrm = (*norms)[r];
                const double* yv = n.value.data() + r * d;
                const double* gy = n.grad.data() + r * d;
                if (nrm <= eps) {
                    for (int j = 0; j < d; ++j) (*g)[r * d + j] += gy[j] / eps;
                    continue;
                }
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += yv[j] * gy[j];
                for (int j = 0; j < d; ++j) (*g)[r * d + j] += (gy[j] - yv[j] * dot) / nrm;
            }
    });
}

Var reshape(const Var& x, Shape shape) {
    Tensor y = x.value().reshaped(std::move(shape));
    return make_result(std::move(y), {x}, [](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += n.grad[i];
    });
}

Var permute(const Var& x, const std::vector<int>& perm) {
    const int r = x.value().rank();
    if (static_cast<int>(perm.size()) != r || r > 6) throw ArgumentError("permute: bad permutation rank");
    std::vector<int> check(perm);
    std::sort(check.begin(), check.end());
    for (int i = 0; i < r; ++i)
        if (check[i] != i) throw ArgumentError("permute: not a permutation");
    const Shape& in = x.shape();
    Shape out(r);
    for (int i = 0; i < r; ++i) out[i] = in[perm[i]];
    std::vector<std::size_t> in_stride(r, 1);
    for (int i = r - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in[i + 1];
    // Source offset for every output element, in output order.
    auto src = std::make_shared<std::vector<std::size_t>>(x.numel());
    std::vector<int> idx(r, 0);
    for (std::size_t o = 0; o < x.numel(); ++o) {
        std::size_t off = 0;
        for (int i = 0; i < r; ++i) off += static_cast<std::size_t>(idx[i]) * in_stride[perm[i]];
        (*src)[o] = off;
        for (int i = r - 1; i >= 0; --i) {
            if (++idx[i] < out[i]) break;
            idx[i] = 0;
        }
    }
    Tensor y(out);
    for (std::size_t o = 0; o < y.numel(); ++o) y[o] = x.value()[(*src)[o]];
    return make_result(std::move(y), {x}, [src](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t o = 0; o < src->size(); ++o) (*g)[(*src)[o]] += n.grad[o];
    });
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw ArgumentError("concat: no inputs");
    const Shape& s0 = parts.front().shape();
    const int r = static_cast<int>(s0.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ArgumentError("concat: axis out of range");
    std::size_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[i];
    std::size_t inner = 1;
    for (int i = axis + 1; i < r; ++i) inner *= s0[i];
    Shape out = s0;
    out[axis] = 0;
    std::vector<std::size_t> chunk;
    for (const Var& p : parts) {
        const Shape& s = p.shape();
        if (static_cast<int>(s.size()) != r) throw ArgumentError("concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && s[i] != s0[i])
                throw ArgumentError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
        out[axis] += s[axis];
        chunk.push_back(static_cast<std::size_t>(s[axis]) * inner);
    }
    const std::size_t row = static_cast<std::size_t>(out[axis]) * inner;
    Tensor y(out);
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(parts[k].value().data() + o * chunk[k], chunk[k], y.data() + o * row + col);
        col += chunk[k];
    }
    return make_result(std::move(y), parts, [outer, row, chunk](Node& n) {
        std::size_t col = 0;
        for (std::size_t k = 0; k < chunk.size(); ++k) {
            if (Tensor* g = n.parent_grad(k))
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t j = 0; j < chunk[k]; ++j) (*g)[o * chunk[k] + j] += n.grad[o * row + col + j];
            col += chunk[k];
        }
    });
}

Var gather_leading(const Var& x, const std::vector<int>& idx) {
    if (x.value().rank() < 1) throw ArgumentError("gather_leading: scalar input");
    const int lead = x.dim(0);
    const std::size_t inner = x.numel() / static_cast<std::size_t>(std::max(1, lead));
    Shape s = x.shape();
    s[0] = static_cast<int>(idx.size());
    Tensor y(s);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= lead) throw ArgumentError("gather_leading: index out of range");
        std::copy_n(x.value().data() + idx[k] * inner, inner, y.data() + k * inner);
    }
    return make_result(std::move(y), {x}, [idx, inner](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t k = 0; k < idx.size(); ++k)
                for (std::size_t j = 0; j < inner; ++j) (*g)[idx[k] * inner + j] += n.grad[k * inner + j];
    });
}

Var slice_leading(const Var& x, int start, int count) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    return gather_leading(x, idx);
}

Var bmm(const Var& a, const Var& b, bool trans_b) {
    require_rank(a, 3, "bmm lhs");
    require_rank(b, 3, "bmm rhs");
    const int batch = a.dim(0);
    const int m = a.dim(1);
    const int k = a.dim(2);
    const int n = trans_b ? b.dim(1) : b.dim(2);
    const int kb = trans_b ? b.dim(2) : b.dim(1);
    if (b.dim(0) != batch || kb != k) {
        throw ArgumentError("bmm: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    Tensor y({batch, m, n});
    for (int i = 0; i < batch; ++i)
        kernels::gemm(false, trans_b, m, n, k, 1.0, a.value().data() + static_cast<std::size_t>(i) * m * k, k,
                      b.value().data() + static_cast<std::size_t>(i) * k * n, trans_b ? k : n, 0.0,
                      y.data() + static_cast<std::size_t>(i) * m * n, n);
    return make_result(std::move(y), {a, b}, [batch, m, k, n, trans_b](Node& nd) {
        Tensor* ga = nd.parent_grad(0);
        Tensor* gb = nd.parent_grad(1);
        const Tensor& av = pval(nd, 0);
        const Tensor& bv = pval(nd, 1);
        for (int i = 0; i < batch; ++i) {
            const double* dy = nd.grad.data() + static_cast<std::size_t>(i) * m * n;
            const double* ap = av.data() + static_cast<std::size_t>(i) * m * k;
            const double* bp = bv.data() + static_cast<std::size_t>(i) * k * n;
            if (ga) {
                // da = dy * op(b)^T
                kernels::gemm(false, !trans_b, m, k, n, 1.0, dy, n, bp, trans_b ? k : n, 1.0,
                              ga->data() + static_cast<std::size_t>(i) * m * k, k);
            }
            if (gb) {
                double* gp = gb->data() + static_cast<std::size_t>(i) * k * n;
                if (trans_b) {
                    // db[n,k] = dy^T a
                    kernels::gemm(true, false, n, k, m, 1.0, dy, n, ap, k, 1.0, gp, k);
                } else {
                    // db[k,n] = a^T dy
                    kernels::gemm(true, false, k, n, m, 1.0, ap, k, dy, n, 1.0, gp, n);
                }
            }
        }
    });
}

Var softmax_last(const Var& x) {
    const int d = x.dim(-1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = x.value().data() + r * d;
        double mx = p[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, p[j]);
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            y[r * d + j] = std::exp(p[j] - mx);
            s += y[r * d + j];
        }
        for (int j = 0; j < d; ++j) y[r * d + j] /= s;
    }
    return make_result(std::move(y), {x}, [rows, d](Node& n) {
        if (Tensor* g = n.parent_grad(0))
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yv = n.value.data() + r * d;
                const double* gy = n.grad.data() + r * d;
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += yv[j] * gy[j];
                for (int j = 0; j < d; ++j) (*g)[r * d + j] += yv[j] * (gy[j] - dot);
            }
    });
}

Var add_matrix_bias(const Var& x, const Var& bias) {
    require_rank(x, 3, "add_matrix_bias");
    if (bias.value().rank() != 2 || bias.dim(0) != x.dim(1) || bias.dim(1) != x.dim(2)) {
        throw ArgumentError("add_matrix_bias: bias " + shape_str(bias.shape()) + " vs " + shape_str(x.shape()));
    }
    const std::size_t mn = bias.numel();
    const int batch = x.dim(0);
    Tensor y = x.value();
    for (int i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < mn; ++j) y[i * mn + j] += bias.value()[j];
    return make_result(std::move(y), {x, bias}, [batch, mn](Node& n) {
        if (Tensor* g = n.parent_grad(0)) *g += n.grad;
        if (Tensor* g = n.parent_grad(1))
            for (int i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < mn; ++j) (*g)[j] += n.grad[i * mn + j];
    });
}

Var temporal_conv(const Var& x, int frames, const Var& w, const Var& b) {
    require_rank(x, 4, "temporal_conv input");
    require_rank(w, 3, "temporal_conv weight");
    if (frames <= 0 || x.dim(0) % frames) throw ArgumentError("temporal_conv: batch not a multiple of frame count");
    const int clips = x.dim(0) / frames;
    const int ci = x.dim(1);
    const int co = w.dim(0);
    const int taps = w.dim(2);
    if (w.dim(1) != ci || taps != 3) throw ArgumentError("temporal_conv: weight shape " + shape_str(w.shape()));
    if (b.dim(0) != co) throw ArgumentError("temporal_conv: bias shape");
    const int hw = x.dim(2) * x.dim(3);
    // Split the kernel into per-tap [Co, Ci] matrices.
    auto split = [co, ci, taps](const Tensor& wv) {
        std::vector<double> out(static_cast<std::size_t>(taps) * co * ci);
        for (int o = 0; o < co; ++o)
            for (int i = 0; i < ci; ++i)
                for (int t = 0; t < taps; ++t) out[(static_cast<std::size_t>(t) * co + o) * ci + i] = wv[(o * ci + i) * taps + t];
        return out;
    };
    const std::vector<double> wk = split(w.value());
    Tensor y({x.dim(0), co, x.dim(2), x.dim(3)});
    for (int c = 0; c < clips; ++c)
        for (int f = 0; f < frames; ++f) {
            double* yo = y.data() + (static_cast<std::size_t>(c) * frames + f) * co * hw;
            for (int o = 0; o < co; ++o) std::fill_n(yo + static_cast<std::size_t>(o) * hw, hw, b.value()[o]);
            for (int t = 0; t < taps; ++t) {
                const int src = std::clamp(f + t - 1, 0, frames - 1);
                kernels::gemm(false, false, co, hw, ci, 1.0, wk.data() + static_cast<std::size_t>(t) * co * ci, ci,
                              x.value().data() + (static_cast<std::size_t>(c) * frames + src) * ci * hw, hw, 1.0, yo, hw);
            }
        }
    return make_result(std::move(y), {x, w, b}, [=](Node& n) {
        Tensor* gx = n.parent_grad(0);
        Tensor* gw = n.parent_grad(1);
        Tensor* gb = n.parent_grad(2);
        const std::vector<double> wk = split(pval(n, 1));
        std::vector<double> dwk(gw ? wk.size() : 0, 0.0);
        const Tensor& xv = pval(n, 0);
        for (int c = 0; c < clips; ++c)
            for (int f = 0; f < frames; ++f) {
                const double* dy = n.grad.data() + (static_cast<std::size_t>(c) * frames + f) * co * hw;
                if (gb)
                    for (int o = 0; o < co; ++o) {
                        double s = 0.0;
                        for (int j = 0; j < hw; ++j) s += dy[static_cast<std::size_t>(o) * hw + j];
                        (*gb)[o] += s;
                    }
                for (int t = 0; t < taps; ++t) {
                    const int src = std::clamp(f + t - 1, 0, frames - 1);
                    const std::size_t xoff = (static_cast<std::size_t>(c) * frames + src) * ci * hw;
                    if (gx)
                        kernels::gemm(true, false, ci, hw, co, 1.0, wk.data() + static_cast<std::size_t>(t) * co * ci,
                                      ci, dy, hw, 1.0, gx->data() + xoff, hw);
                    if (gw)
                        kernels::gemm(false, true, co, ci, hw, 1.0, dy, hw, xv.data() + xoff, hw, 1.0,
                                      dwk.data() + static_cast<std::size_t>(t) * co * ci, ci);
                }
            }
        if (gw)
            for (int o = 0; o < co; ++o)
                for (int i = 0; i < ci; ++i)
                    for (int t = 0; t < taps; ++t)
                        (*gw)[(o * ci + i) * taps + t] += dwk[(static_cast<std::size_t>(t) * co + o) * ci + i];
    });
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "cross_entropy");
    const int rows = logits.dim(0);
    const int k = logits.dim(1);
    if (static_cast<int>(labels.size()) != rows) throw ArgumentError("cross_entropy: label count mismatch");
    auto probs = std::make_shared<Tensor>(logits.shape());
    double loss = 0.0;
    for (int r = 0; r < rows; ++r) {
        if (labels[r] < 0 || labels[r] >= k) throw ArgumentError("cross_entropy: label out of range");
        const double* p = logits.value().data() + static_cast<std::size_t>(r) * k;
        double mx = p[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, p[j]);
        // Summed in sorted order so the loss does not depend on logit order.
        std::vector<double> e(k);
        for (int j = 0; j < k; ++j) e[j] = std::exp(p[j] - mx);
        std::sort(e.begin(), e.end());
        const double lse = mx + std::log(std::accumulate(e.begin(), e.end(), 0.0));
        for (int j = 0; j < k; ++j) (*probs)[static_cast<std::size_t>(r) * k + j] = std::exp(p[j] - lse);
        loss += lse - p[labels[r]];
    }
    return make_result(Tensor({1}, {loss / rows}), {logits}, [rows, k, labels, probs](Node& n) {
        if (Tensor* g = n.parent_grad(0)) {
            const double s = n.grad[0] / rows;
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < k; ++j) {
                    const std::size_t i = static_cast<std::size_t>(r) * k + j;
                    (*g)[i] += s * ((*probs)[i] - (j == labels[r] ? 1.0 : 0.0));
                }
        }
    });
}

}  // namespace hicast::ops
