// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include "doctest.h"
#include "hicast/adapter.hpp"
#include "hicast/errors.hpp"
#include "hicast/synth.hpp"

using namespace hicast;

namespace {

AdapterConfig edge_cfg() {
    AdapterConfig c;
    c.kind = ControlKind::edge;
    c.channels = {32, 64};
    return c;
}

// Gives the zero-initialized projections random values.
void wake(StyleAdapter& a) {
    Rng rng(3);
    for (const auto& [name, p] : a.params().items())
        if (name.find(".proj.") != std::string::npos) p.node()->value = rng.normal_tensor(p.shape(), 0.1);
}

AdapterPyramid random_pyramid(std::uint64_t seed) {
    Rng rng(seed);
    return {Var(rng.normal_tensor({2, 32, 8, 8})), Var(rng.normal_tensor({2, 64, 4, 4}))};
}

}  // namespace

TEST_CASE("adapter pyramid shapes and zero-init") {
    StyleAdapter a(edge_cfg(), 1);
    const ControlMap m = annotate(gen_content_image(4, 32), ControlKind::edge);
    const AdapterPyramid p = a.forward(m);
    REQUIRE(p.size() == 2);
    CHECK(p[0].shape() == Shape{1, 32, 8, 8});
    CHECK(p[1].shape() == Shape{1, 64, 4, 4});
    for (const Var& l : p) CHECK(l.value().max_abs() == 0.0);

    wake(a);
    ControlMap zero{ControlKind::edge, Tensor({1, 32, 32})};
    const AdapterPyramid z = a.forward(zero);
    const AdapterPyramid q = a.forward(m);
    CHECK(max_abs_diff(q[0].value(), z[0].value()) > 0.0);
    CHECK(bit_equal(q[1].value(), a.forward(m)[1].value()));
}

TEST_CASE("adapter argument checks") {
    StyleAdapter a(edge_cfg(), 1);
    CHECK_THROWS_AS(a.forward(ControlMap{ControlKind::depth, Tensor({1, 32, 32})}), ArgumentError);
    CHECK_THROWS_AS(a.forward(ControlMap{ControlKind::edge, Tensor({1, 30, 30})}), ArgumentError);
    CHECK_THROWS_AS(a.forward(Var(Tensor({1, 3, 32, 32}))), ArgumentError);
    AdapterConfig bad = edge_cfg();
    bad.channels.clear();
    CHECK_THROWS_AS(StyleAdapter(bad, 1), ConfigError);
}

TEST_CASE("combine") {
    const AdapterPyramid p = random_pyramid(1), q = random_pyramid(2);
    auto same = [](const AdapterPyramid& a, const AdapterPyramid& b) {
        double d = 0;
        for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, max_abs_diff(a[k].value(), b[k].value()));
        return d;
    };
    CHECK(same(combine({{p, 1.0}}), p) == 0.0);
    CHECK(same(combine({{p, 0.5}, {p, 0.5}}), p) < 1e-15);
    for (const Var& l : combine({{p, 0.0}, {q, 0.0}})) CHECK(l.value().max_abs() == 0.0);
    // Linearity in each weight.
    const AdapterPyramid ab = combine({{p, 0.3 + 1.1}});
    const AdapterPyramid a = combine({{p, 0.3}}), b = combine({{p, 1.1}});
    for (std::size_t k = 0; k < p.size(); ++k)
        CHECK(max_abs_diff(ab[k].value(), a[k].value() + b[k].value()) < 1e-6);
    CHECK(combine({}).empty());
    AdapterPyramid short_p{p[0]};
    CHECK_THROWS_AS(combine({{p, 1.0}, {short_p, 1.0}}), ArgumentError);
    AdapterPyramid odd{p[0], Var(Tensor({2, 64, 2, 2}))};
    CHECK_THROWS_AS(combine({{p, 1.0}, {odd, 1.0}}), ArgumentError);
}

TEST_CASE("weight-zero adapters leave the backbone unchanged") {
    Backbone b(BackboneConfig{}, 1);
    StyleAdapter edge(edge_cfg(), 2);
    AdapterConfig dc = edge_cfg();
    dc.kind = ControlKind::depth;
    StyleAdapter depth(dc, 3);
    wake(edge);
    wake(depth);
    const Image img = gen_content_image(9, 32);
    const AdapterPyramid pe = edge.forward(annotate(img, ControlKind::edge));
    const AdapterPyramid pd = depth.forward(annotate(img, ControlKind::depth));
    Rng rng(1);
    Var z(rng.normal_tensor({1, 4, 8, 8})), c(rng.normal_tensor({1, 3, 8, 8})), e(rng.normal_tensor({1, 64}));
    const Tensor none = b.predict(z, c, e).value();
    CHECK(max_abs_diff(none, b.predict(z, c, e, combine({{pe, 0.0}, {pd, 0.0}})).value()) < 1e-6);
    CHECK(max_abs_diff(none, b.predict(z, c, e, combine({{pe, 1.0}, {pd, 0.5}})).value()) > 1e-6);
}

TEST_CASE("adapter checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "hicast_test_adapter_ckpt";
    std::filesystem::remove_all(dir);
    StyleAdapter a(edge_cfg(), 5);
    wake(a);
    a.save(dir, 3);
    StyleAdapter r = StyleAdapter::load(dir);
    CHECK(r.kind() == ControlKind::edge);
    const ControlMap m = annotate(gen_content_image(2, 32), ControlKind::edge);
    // Weights are stored as float32.
    CHECK(max_abs_diff(a.forward(m)[1].value(), r.forward(m)[1].value()) < 1e-5);
    std::filesystem::remove_all(dir);
}
