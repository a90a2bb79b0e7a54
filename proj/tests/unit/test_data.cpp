// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "hicast/errors.hpp"
#include "hicast/synth.hpp"

using namespace hicast;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("hicast_test_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Distance from m to the convex hull of pts, by enumerating supports.
double hull_distance(const std::vector<Color>& pts, const Eigen::Vector3d& m) {
    const int n = static_cast<int>(pts.size());
    double best = 1e300;
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> idx;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) idx.push_back(i);
        const int k = static_cast<int>(idx.size());
        // min ||P l - m||^2 s.t. sum l = 1, via KKT.
        Eigen::MatrixXd P(3, k);
        for (int j = 0; j < k; ++j) P.col(j) << pts[idx[j]][0], pts[idx[j]][1], pts[idx[j]][2];
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k + 1, k + 1);
        K.topLeftCorner(k, k) = P.transpose() * P;
        K.block(0, k, k, 1).setOnes();
        K.block(k, 0, 1, k).setOnes();
        Eigen::VectorXd rhs(k + 1);
        rhs << P.transpose() * m, 1.0;
        Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
        Eigen::VectorXd l = sol.head(k);
        if (l.minCoeff() < -1e-12) continue;
        best = std::min(best, (P * l - m).norm());
    }
    return best;
}

// Independent bilinear sampler with border clamp.
double sample(const Tensor& img, int c, double x, double y) {
    const int h = img.dim(1), w = img.dim(2);
    x = std::clamp(x, 0.0, w - 1.0);
    y = std::clamp(y, 0.0, h - 1.0);
    int x0 = std::min(static_cast<int>(x), w - 1), y0 = std::min(static_cast<int>(y), h - 1);
    int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double ax = x - x0, ay = y - y0;
    return (1 - ax) * (1 - ay) * img.at({c, y0, x0}) + ax * (1 - ay) * img.at({c, y0, x1}) +
           (1 - ax) * ay * img.at({c, y1, x0}) + ax * ay * img.at({c, y1, x1});
}

Image disc_image(int size, bool with_scene) {
    auto scene = std::make_shared<SceneInfo>();
    scene->height = scene->width = size;
    SceneObject o;
    o.cx = o.cy = size / 2.0;
    o.radius = size / 4.0;
    o.color = {0.8, -0.2, 0.1};
    o.depth = 0.4;
    scene->objects.push_back(o);
    Image img;
    img.pixels = Tensor({3, size, size});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool in = std::hypot(x - o.cx, y - o.cy) <= o.radius;
            scene->object_map.push_back(in ? 0 : -1);
            for (int c = 0; c < 3; ++c) img.pixels.at({c, y, x}) = in ? o.color[c] : -0.5;
        }
    if (with_scene) img.scene = scene;
    img.id = "disc";
    return img;
}

std::set<double> unique_values(const Tensor& t) { return {t.storage().begin(), t.storage().end()}; }

}  // namespace

TEST_CASE("content generator is deterministic and seed-sensitive") {
    Image a = gen_content_image(0, 32), b = gen_content_image(0, 32), c = gen_content_image(1, 32);
    CHECK(a.pixels.shape() == Shape{3, 32, 32});
    CHECK(bit_equal(a.pixels, b.pixels));
    std::size_t differ = 0;
    for (int p = 0; p < 32 * 32; ++p)
        for (int ch = 0; ch < 3; ++ch)
            if (a.pixels[ch * 1024 + p] != c.pixels[ch * 1024 + p]) {
                ++differ;
                break;
            }
    CHECK(differ >= 11);
    REQUIRE(a.scene);
    CHECK(a.scene->objects.size() >= 2);
    CHECK(a.scene->objects.size() <= 5);
    CHECK(a.pixels.max_abs() <= 1.0);
    CHECK_THROWS_AS(gen_content_image(7, 30), ConfigError);
    CHECK_THROWS_AS(gen_content_image(7, 12), ConfigError);
}

TEST_CASE("style images stay inside the palette hull") {
    for (std::uint64_t seed : {3ull, 4ull, 5ull, 6ull, 11ull, 12ull}) {
        Image s = gen_style_image(seed, 32);
        auto pal = style_palette(seed);
        Eigen::Vector3d mean;
        for (int c = 0; c < 3; ++c) mean[c] = slice_leading(s.pixels, c, 1).mean();
        CHECK(hull_distance(pal, mean) < 1e-9);
        // Every pixel too: palette mixtures only.
        for (int p = 0; p < 32 * 32; p += 37) {
            Eigen::Vector3d px(s.pixels[p], s.pixels[1024 + p], s.pixels[2048 + p]);
            CHECK(hull_distance(pal, px) < 1e-9);
        }
        CHECK(s.id.find(to_string(style_family_for(seed))) != std::string::npos);
        CHECK(bit_equal(s.pixels, gen_style_image(seed, 32).pixels));
    }
}

TEST_CASE("all style families occur") {
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) seen.insert(static_cast<int>(style_family_for(seed)));
    CHECK(seen.size() == 4);
    for (int f = 0; f < 4; ++f) {
        for (std::uint64_t seed = 0;; ++seed)
            if (static_cast<int>(style_family_for(seed)) == f) {
                CHECK(gen_style_image(seed, 32).style_family == f);
                break;
            }
    }
}

TEST_CASE("video clips carry exact flows") {
    VideoClip clip = gen_video_clip(0, 8, 32);
    REQUIRE(clip.has_flow());
    CHECK(clip.flows->shape() == Shape{7, 2, 32, 32});
    CHECK(clip.occlusion->shape() == Shape{7, 32, 32});
    CHECK(bit_equal(clip.frame(0).pixels, gen_content_image(0, 32).pixels));
    CHECK_THROWS_AS(gen_video_clip(0, 1, 32), ArgumentError);

    for (std::uint64_t seed : {0ull, 1ull, 2ull, 3ull, 4ull}) {
        VideoClip v = gen_video_clip(seed, 6, 32);
        const Tensor& fl = *v.flows;
        const Tensor& oc = *v.occlusion;
        std::size_t valid = 0;
        double worst = 0;
        for (int k = 0; k < 5; ++k) {
            Tensor next = slice_leading(v.frames, k + 1, 1).reshaped({3, 32, 32});
            Tensor warped = warp(next, slice_leading(fl, k, 1).reshaped({2, 32, 32}));
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    double fx = fl.at({k, 0, y, x}), fy = fl.at({k, 1, y, x});
                    CHECK(std::hypot(fx, fy) <= 32 / 4.0);
                    if (oc.at({k, y, x}) < 0.5) continue;
                    ++valid;
                    for (int c = 0; c < 3; ++c) {
                        double want = v.frames.at({k, c, y, x});
                        worst = std::max(worst, std::abs(sample(next, c, x + fx, y + fy) - want));
                        worst = std::max(worst, std::abs(warped.at({c, y, x}) - want));
                    }
                }
        }
        CHECK(valid > 5 * 32 * 32 / 2);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("static clips have zero flow and no occlusion") {
    VideoOptions opts;
    opts.static_scene = true;
    VideoClip v = gen_video_clip(9, 4, 32, opts);
    CHECK(v.flows->max_abs() == 0.0);
    CHECK(v.occlusion->sum() == 3 * 32 * 32);
    CHECK(bit_equal(slice_leading(v.frames, 0, 1), slice_leading(v.frames, 3, 1)));
}

TEST_CASE("annotators") {
    Image flat;
    flat.pixels = Tensor({3, 16, 16}, 0.3);
    CHECK(annotate(flat, ControlKind::edge).map.max_abs() == 0.0);

    Image disc = disc_image(32, true);
    auto seg = annotate(disc, ControlKind::segmentation);
    CHECK(unique_values(seg.map).size() == 2);
    CHECK(unique_values(annotate(disc_image(32, false), ControlKind::segmentation).map).size() == 2);

    auto edge = annotate(gen_content_image(2, 32), ControlKind::edge);
    CHECK(edge.map.shape() == Shape{1, 32, 32});
    CHECK(*std::max_element(edge.map.storage().begin(), edge.map.storage().end()) == doctest::Approx(1.0));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Image img = gen_content_image(seed, 32);
        auto depth = annotate(img, ControlKind::depth);
        const auto& objs = img.scene->objects;
        std::vector<std::set<double>> per(objs.size());
        for (int p = 0; p < 32 * 32; ++p) {
            int id = img.scene->object_map[p];
            if (id >= 0) per[id].insert(depth.map[p]);
        }
        for (std::size_t i = 0; i < objs.size(); ++i) {
            CHECK(per[i].size() <= 1);
            for (std::size_t j = 0; j < objs.size(); ++j)
                if (!per[i].empty() && !per[j].empty() && objs[i].depth < objs[j].depth)
                    CHECK(*per[i].begin() > *per[j].begin());
        }
        for (double v : unique_values(annotate(img, ControlKind::segmentation).map)) {
            double k = v * 7.0;
            CHECK(std::abs(k - std::round(k)) < 1e-12);
        }
    }

    // Proxies depend on pixels only.
    Image a = gen_style_image(5, 32), b = a;
    b.id = "renamed";
    for (auto kind : {ControlKind::edge, ControlKind::depth, ControlKind::segmentation}) {
        auto ma = annotate(a, kind), mb = annotate(b, kind);
        CHECK(bit_equal(ma.map, mb.map));
        CHECK(ma.map.shape() == Shape{1, 32, 32});
        for (double v : ma.map.storage()) CHECK((v >= 0.0 && v <= 1.0));
    }
    CHECK(unique_values(annotate(a, ControlKind::segmentation).map).size() <= 8);
    CHECK_THROWS_AS(parse_control_kind("canny"), ArgumentError);
    CHECK(parse_control_kind("depth") == ControlKind::depth);
}

TEST_CASE("png, flow and occlusion files round-trip") {
    fs::path dir = scratch("io");
    Tensor px({3, 8, 16});
    for (std::size_t i = 0; i < px.numel(); ++i) px[i] = (static_cast<int>(i * 37 % 256)) / 255.0 * 2.0 - 1.0;
    write_png(dir / "a.png", px);
    CHECK(max_abs_diff(read_png(dir / "a.png"), px) < 1e-12);

    Tensor flow({2, 4, 5});
    for (std::size_t i = 0; i < flow.numel(); ++i) flow[i] = static_cast<double>(i) * 0.25 - 3.0;
    write_flow(dir / "f.hcfl", flow);
    CHECK(bit_equal(read_flow(dir / "f.hcfl"), flow));
    CHECK(fs::file_size(dir / "f.hcfl") == 4 + 8 + 2 * 4 * 5 * 4);
    {
        std::ifstream in(dir / "f.hcfl", std::ios::binary);
        char magic[4];
        std::uint32_t h, w;
        float x0, y0;
        in.read(magic, 4);
        in.read(reinterpret_cast<char*>(&h), 4);
        in.read(reinterpret_cast<char*>(&w), 4);
        in.read(reinterpret_cast<char*>(&x0), 4);
        in.read(reinterpret_cast<char*>(&y0), 4);
        CHECK(std::string(magic, 4) == "HCFL");
        CHECK(h == 4);
        CHECK(w == 5);
        CHECK(x0 == -3.0f);
        CHECK(y0 == static_cast<float>(20 * 0.25 - 3.0));
    }

    Tensor occ({3, 3});
    occ[4] = 1.0;
    write_occlusion(dir / "o.hcoc", occ);
    CHECK(bit_equal(read_occlusion(dir / "o.hcoc"), occ));
    CHECK_THROWS_AS(read_flow(dir / "o.hcoc"), FormatError);
    CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
}

TEST_CASE("folder ingestion") {
    fs::path dir = scratch("folder");
    CHECK(load_folder(dir, FolderKind::images).size() == 0);
    for (std::string name : {"c", "a", "b"}) write_png(dir / (name + ".png"), gen_content_image(name[0], 16).pixels);
    auto ds = load_folder(dir, FolderKind::images);
    REQUIRE(ds.size() == 3);
    CHECK(ds.images.items[0].id == "a");
    CHECK(ds.images.items[2].id == "c");
    CHECK_THROWS_AS(load_folder(dir / "nope", FolderKind::images), IoError);

    std::ofstream(dir / "d.png") << "not a png";
    try {
        load_image_folder(dir);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("d.png") != std::string::npos);
    }

    fs::path vid = scratch("video");
    VideoClip clip = gen_video_clip(4, 3, 16);
    fs::create_directories(vid / "clip0");
    for (int k = 0; k < 3; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d", k);
        write_png(vid / "clip0" / (std::string(name) + ".png"), clip.frame(k).pixels);
        if (k < 2) {
            write_flow(vid / "clip0" / (std::string(name) + ".hcfl"), slice_leading(*clip.flows, k, 1).reshaped({2, 16, 16}));
            write_occlusion(vid / "clip0" / (std::string(name) + ".hcoc"), slice_leading(*clip.occlusion, k, 1).reshaped({16, 16}));
        }
    }
    fs::create_directories(vid / "clip1");
    write_png(vid / "clip1" / "0.png", gen_content_image(1, 16).pixels);
    write_png(vid / "clip1" / "1.png", gen_content_image(2, 16).pixels);
    auto vids = load_folder(vid, FolderKind::video);
    REQUIRE(vids.size() == 2);
    CHECK(vids.videos.items[0].has_flow());
    CHECK(max_abs_diff(*vids.videos.items[0].flows, *clip.flows) < 1e-6);
    CHECK(!vids.videos.items[1].has_flow());

    write_png(vid / "clip1" / "2.png", gen_content_image(3, 32).pixels);
    CHECK_THROWS_AS(load_video_folder(vid), FormatError);
}
