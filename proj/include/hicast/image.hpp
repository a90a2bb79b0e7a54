// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hicast/tensor.hpp"

// Pixel data is channel-first with values in [-1, 1].

namespace hicast {

enum class ShapeKind { disc, rect, triangle };

struct SceneObject {
    ShapeKind kind = ShapeKind::disc;
    double cx = 0.0;  // center at frame 0, pixels
    double cy = 0.0;
    double radius = 1.0;  // disc radius, triangle circumradius, rect half-width
    double aspect = 1.0;  // rect half-height / half-width
    double angle = 0.0;
    std::array<double, 3> color{};
    double depth = 0.5;  // distance; larger is farther, background is 1
    int label = 1;       // 1-based instance label; 0 is background
    double vx = 0.0;     // pixels per frame
    double vy = 0.0;
    double omega = 0.0;  // radians per frame
};

/// Ground truth for a procedurally generated frame.
struct SceneInfo {
    int height = 0;
    int width = 0;
    std::vector<SceneObject> objects;
    /// Index into objects of the visible object per pixel, -1 for background.
    std::vector<int> object_map;
};

struct Image {
    Tensor pixels;  // [3, H, W]
    std::string id;
    std::shared_ptr<const SceneInfo> scene;  // synthetic content only
    std::optional<int> style_family;         // synthetic style only

    int height() const { return pixels.dim(1); }
    int width() const { return pixels.dim(2); }
};

struct VideoClip {
    Tensor frames;                    // [N, 3, H, W]
    std::optional<Tensor> flows;      // [N-1, 2, H, W], forward flow t -> t+1 in pixels
    std::optional<Tensor> occlusion;  // [N-1, H, W], 1 valid, 0 occluded
    std::string id;
    std::vector<std::shared_ptr<const SceneInfo>> scenes;

    int frame_count() const { return frames.dim(0); }
    bool has_flow() const { return flows.has_value() && occlusion.has_value(); }
    Image frame(int i) const;
};

enum class ControlKind { edge, depth, segmentation };

struct ControlMap {
    ControlKind kind = ControlKind::edge;
    Tensor map;  // [1, H, W] in [0, 1]
};

ControlKind parse_control_kind(const std::string& name);
std::string to_string(ControlKind kind);

/// Checks the Image invariants: rank-3 RGB, finite, spatial size divisible by `factor`.
void validate_image(const Image& image, int factor);

/// 8-bit RGB PNG I/O; values map linearly between [0, 255] and [-1, 1].
void write_png(const std::filesystem::path& path, const Tensor& pixels);
Tensor read_png(const std::filesystem::path& path);

/// Flow file: magic "HCFL", u32 H, u32 W, then 2*H*W little-endian float32,
/// row-major, channel-last (x, y).
void write_flow(const std::filesystem::path& path, const Tensor& flow);
Tensor read_flow(const std::filesystem::path& path);
/// Occlusion file: magic "HCOC", u32 H, u32 W, then H*W bytes in {0, 1}.
void write_occlusion(const std::filesystem::path& path, const Tensor& mask);
Tensor read_occlusion(const std::filesystem::path& path);

/// out(p) = src(p + flow(p)), bilinear, border-clamped. src is [C, H, W], flow [2, H, W].
Tensor warp(const Tensor& src, const Tensor& flow);

}  // namespace hicast
