// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "hicast/errors.hpp"
#include "hicast/kernels.hpp"

namespace hicast {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

std::uint8_t to_byte(double v) {
    double s = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(s * 255.0));
}

void write_header(std::ofstream& out, const char magic[4], int h, int w) {
    out.write(magic, 4);
    std::uint32_t dims[2] = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
}

std::pair<int, int> read_header(std::ifstream& in, const char magic[4], const std::filesystem::path& path) {
    char got[4];
    std::uint32_t dims[2];
    in.read(got, 4);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || std::memcmp(got, magic, 4) != 0) throw FormatError("bad header in " + path.string());
    if (dims[0] == 0 || dims[1] == 0 || dims[0] > 65536 || dims[1] > 65536)
        throw FormatError("bad dimensions in " + path.string());
    return {static_cast<int>(dims[0]), static_cast<int>(dims[1])};
}

void png_error_quiet(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_warning_quiet(png_structp, png_const_charp) {}

}  // namespace

Image VideoClip::frame(int i) const {
    Image img;
    int h = frames.dim(2), w = frames.dim(3);
    img.pixels = slice_leading(frames, i, 1).reshaped({3, h, w});
    img.id = id + "/" + std::to_string(i);
    if (i < static_cast<int>(scenes.size())) img.scene = scenes[i];
    return img;
}

ControlKind parse_control_kind(const std::string& name) {
    if (name == "edge") return ControlKind::edge;
    if (name == "depth") return ControlKind::depth;
    if (name == "segmentation" || name == "seg") return ControlKind::segmentation;
    throw ArgumentError("unknown control kind '" + name + "' (expected edge, depth or segmentation)");
}

std::string to_string(ControlKind kind) {
    switch (kind) {
        case ControlKind::edge: return "edge";
        case ControlKind::depth: return "depth";
        case ControlKind::segmentation: return "segmentation";
    }
    return "?";
}

void validate_image(const Image& image, int factor) {
    const Tensor& p = image.pixels;
    if (p.rank() != 3 || p.dim(0) != 3)
        throw ArgumentError("image '" + image.id + "' must be [3,H,W], got " + shape_str(p.shape()));
    if (factor > 0 && (p.dim(1) % factor != 0 || p.dim(2) % factor != 0))
        throw ArgumentError("image '" + image.id + "' size " + shape_str(p.shape()) +
                            " not divisible by codec factor " + std::to_string(factor));
    if (!p.all_finite()) throw NumericError("image '" + image.id + "' has non-finite values");
}

void write_png(const std::filesystem::path& path, const Tensor& pixels) {
    if (pixels.rank() != 3 || (pixels.dim(0) != 3 && pixels.dim(0) != 1))
        throw ArgumentError("write_png expects [3,H,W] or [1,H,W], got " + shape_str(pixels.shape()));
    const int c = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2);
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                int src = c == 1 ? 0 : ch;
                rows[(static_cast<std::size_t>(y) * w + x) * 3 + ch] =
                    to_byte(pixels[(static_cast<std::size_t>(src) * h + y) * w + x]);
            }

    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) png_write_row(png, rows.data() + static_cast<std::size_t>(y) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed for " + path.string());
    }
    std::vector<std::uint8_t> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("cannot read PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != w * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG layout in " + path.string());
    }
    buf.resize(static_cast<std::size_t>(w) * h * 3);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, buf.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor t({3, static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p)
        for (int c = 0; c < 3; ++c) t[c * static_cast<std::size_t>(w) * h + p] = buf[p * 3 + c] / 255.0 * 2.0 - 1.0;
    return t;
}

void write_flow(const std::filesystem::path& path, const Tensor& flow) {
    if (flow.rank() != 3 || flow.dim(0) != 2) throw ArgumentError("flow must be [2,H,W]");
    const int h = flow.dim(1), w = flow.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    write_header(out, "HCFL", h, w);
    std::vector<float> data(static_cast<std::size_t>(h) * w * 2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < plane; ++p) {
        data[p * 2] = static_cast<float>(flow[p]);
        data[p * 2 + 1] = static_cast<float>(flow[plane + p]);
    }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_flow(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto [h, w] = read_header(in, "HCFL", path);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> data(plane * 2);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!in) throw FormatError("truncated flow file " + path.string());
    Tensor flow({2, h, w});
    for (std::size_t p = 0; p < plane; ++p) {
        flow[p] = data[p * 2];
        flow[plane + p] = data[p * 2 + 1];
    }
    return flow;
}

void write_occlusion(const std::filesystem::path& path, const Tensor& mask) {
    if (mask.rank() != 2) throw ArgumentError("occlusion mask must be [H,W]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    write_header(out, "HCOC", mask.dim(0), mask.dim(1));
    std::vector<char> bytes(mask.numel());
    for (std::size_t i = 0; i < mask.numel(); ++i) bytes[i] = mask[i] > 0.5 ? 1 : 0;
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_occlusion(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto [h, w] = read_header(in, "HCOC", path);
    std::vector<char> bytes(static_cast<std::size_t>(h) * w);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw FormatError("truncated occlusion file " + path.string());
    Tensor mask({h, w});
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (bytes[i] != 0 && bytes[i] != 1) throw FormatError("occlusion values must be 0/1 in " + path.string());
        mask[i] = bytes[i];
    }
    return mask;
}

Tensor warp(const Tensor& src, const Tensor& flow) {
    if (src.rank() != 3 || flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != src.dim(1) ||
        flow.dim(2) != src.dim(2))
        throw ArgumentError("warp: src " + shape_str(src.shape()) + " vs flow " + shape_str(flow.shape()));
    Tensor out(src.shape());
    kernels::bilinear_warp(src.dim(0), src.dim(1), src.dim(2), src.data(), flow.data(), out.data());
    return out;
}

}  // namespace hicast
