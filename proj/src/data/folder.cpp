// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "hicast/errors.hpp"
#include "hicast/synth.hpp"

namespace hicast {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> files_with_ext(const fs::path& dir, const std::string& ext) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return out;
}

void require_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
}

VideoClip load_clip(const fs::path& dir, const std::vector<fs::path>& frame_files) {
    VideoClip clip;
    clip.id = dir.filename().string();
    std::vector<Tensor> frames;
    for (const fs::path& f : frame_files) {
        Tensor t = read_png(f);
        if (!frames.empty() && t.shape() != frames.front().shape())
            throw FormatError("frame size mismatch in " + dir.string() + ": " + f.filename().string() + " is " +
                              shape_str(t.shape()) + ", expected " + shape_str(frames.front().shape()));
        frames.push_back(std::move(t));
    }
    if (frames.size() < 2) throw FormatError("video " + dir.string() + " needs at least 2 frames");
    clip.frames = stack(frames);

    auto flow_files = files_with_ext(dir, ".hcfl");
    auto occ_files = files_with_ext(dir, ".hcoc");
    const std::size_t pairs = frames.size() - 1;
    if (flow_files.size() == pairs && occ_files.size() == pairs) {
        const Shape& fs0 = frames.front().shape();
        std::vector<Tensor> flows, occ;
        for (std::size_t i = 0; i < pairs; ++i) {
            Tensor fl = read_flow(flow_files[i]);
            Tensor oc = read_occlusion(occ_files[i]);
            if (fl.dim(1) != fs0[1] || fl.dim(2) != fs0[2] || oc.dim(0) != fs0[1] || oc.dim(1) != fs0[2])
                throw FormatError("flow/occlusion size mismatch in " + dir.string());
            flows.push_back(std::move(fl));
            occ.push_back(std::move(oc));
        }
        clip.flows = stack(flows);
        clip.occlusion = stack(occ);
    }
    return clip;
}

}  // namespace

ImageDataset load_image_folder(const fs::path& dir) {
    require_dir(dir);
    ImageDataset ds;
    for (const fs::path& f : files_with_ext(dir, ".png")) {
        Image img;
        img.pixels = read_png(f);
        img.id = f.stem().string();
        ds.items.push_back(std::move(img));
    }
    return ds;
}

VideoDataset load_video_folder(const fs::path& dir) {
    require_dir(dir);
    VideoDataset ds;
    auto direct = files_with_ext(dir, ".png");
    if (!direct.empty()) {
        ds.items.push_back(load_clip(dir, direct));
        return ds;
    }
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& sub : subdirs) {
        auto frames = files_with_ext(sub, ".png");
        if (!frames.empty()) ds.items.push_back(load_clip(sub, frames));
    }
    return ds;
}

FolderDataset load_folder(const fs::path& dir, FolderKind kind) {
    FolderDataset ds;
    ds.kind = kind;
    if (kind == FolderKind::images)
        ds.images = load_image_folder(dir);
    else
        ds.videos = load_video_folder(dir);
    return ds;
}

}  // namespace hicast
