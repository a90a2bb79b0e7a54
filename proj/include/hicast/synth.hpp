// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hicast/image.hpp"

namespace hicast {

inline constexpr int kDefaultCodecFactor = 4;

enum class StyleFamily { stripes = 0, stippling = 1, swirls = 2, blocks = 3 };
inline constexpr int kStyleFamilyCount = 4;
std::string to_string(StyleFamily family);

using Color = std::array<double, 3>;

/// Content image: 2-5 discs, rectangles and triangles over a linear gradient.
/// Throws ConfigError if size < 16 or size is not a multiple of factor.
Image gen_content_image(std::uint64_t seed, int size, int factor = kDefaultCodecFactor);

/// Style image from one of the procedural families; every pixel is a convex
/// combination of the seeded palette's colors.
Image gen_style_image(std::uint64_t seed, int size, int factor = kDefaultCodecFactor);
StyleFamily style_family_for(std::uint64_t seed);
std::vector<Color> style_palette(std::uint64_t seed);

struct VideoOptions {
    bool static_scene = false;  // zero velocities
    bool rotation = true;       // allow per-object angular velocity
    int max_speed = 2;          // integer pixels per frame per axis
};

/// Clip of moving content objects with exact flow and occlusion ground truth.
VideoClip gen_video_clip(std::uint64_t seed, int frames, int size, const VideoOptions& opts = {},
                         int factor = kDefaultCodecFactor);

/// Edge: normalized Sobel magnitude of luminance. Depth and segmentation come
/// from scene metadata when present; otherwise a smoothed-luminance depth proxy
/// and a color quantization into <= 8 labels.
ControlMap annotate(const Image& image, ControlKind kind);

struct ImageDataset {
    std::vector<Image> items;
};

struct VideoDataset {
    std::vector<VideoClip> items;
};

enum class FolderKind { images, video };

struct FolderDataset {
    FolderKind kind = FolderKind::images;
    ImageDataset images;
    VideoDataset videos;
    std::size_t size() const { return kind == FolderKind::images ? images.items.size() : videos.items.size(); }
};

/// PNGs sorted by file name. A missing directory is an IoError.
ImageDataset load_image_folder(const std::filesystem::path& dir);
/// A directory of frame PNGs is one clip; otherwise each subdirectory is a clip.
/// Flow (*.hcfl) and occlusion (*.hcoc) files are attached when N-1 of each exist.
VideoDataset load_video_folder(const std::filesystem::path& dir);
FolderDataset load_folder(const std::filesystem::path& dir, FolderKind kind);

/// Procedural corpora used by the trainers and tests.
ImageDataset make_content_corpus(std::uint64_t seed, int count, int size);
ImageDataset make_style_corpus(std::uint64_t seed, int count, int size);
VideoDataset make_video_corpus(std::uint64_t seed, int count, int frames, int size);

}  // namespace hicast
