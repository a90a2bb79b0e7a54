// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hicast/errors.hpp"
#include "hicast/rng.hpp"

namespace hicast {

namespace {

constexpr double kPi = std::numbers::pi;

void check_size(int size, int factor) {
    if (factor < 1) throw ConfigError("codec factor must be positive");
    if (size < 16) throw ConfigError("image size must be >= 16, got " + std::to_string(size));
    if (size % factor != 0)
        throw ConfigError("image size " + std::to_string(size) + " not divisible by codec factor " +
                          std::to_string(factor));
}

Color hsv_color(double h, double s, double v) {
    h = h - std::floor(h);
    double c = v * s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    double m = v - c;
    return {(r + m) * 2.0 - 1.0, (g + m) * 2.0 - 1.0, (b + m) * 2.0 - 1.0};
}

Color random_color(Rng& rng) {
    return hsv_color(rng.uniform(), rng.uniform(0.45, 1.0), rng.uniform(0.3, 1.0));
}

struct Background {
    Color c0{}, c1{};
    double theta = 0.0;
};

struct Scene {
    Background bg;
    std::vector<SceneObject> objects;
};

Scene random_scene(Rng& rng, int size) {
    Scene s;
    s.bg.c0 = random_color(rng);
    s.bg.c1 = random_color(rng);
    s.bg.theta = rng.uniform(0.0, 2.0 * kPi);
    int count = rng.randint(2, 5);
    std::vector<int> rank(count);
    std::iota(rank.begin(), rank.end(), 0);
    for (int i = count - 1; i > 0; --i) std::swap(rank[i], rank[rng.randint(0, i)]);
    for (int i = 0; i < count; ++i) {
        SceneObject o;
        o.kind = static_cast<ShapeKind>(rng.randint(0, 2));
        o.radius = rng.uniform(0.12, 0.26) * size;
        o.aspect = rng.uniform(0.5, 1.5);
        o.angle = rng.uniform(0.0, 2.0 * kPi);
        o.cx = rng.uniform(0.15, 0.85) * (size - 1);
        o.cy = rng.uniform(0.15, 0.85) * (size - 1);
        o.color = random_color(rng);
        o.depth = 0.2 + 0.6 * (rank[i] + 0.5) / count;
        o.label = i + 1;
        s.objects.push_back(o);
    }
    return s;
}

bool contains(const SceneObject& o, int frame, double px, double py) {
    double cx = o.cx + frame * o.vx, cy = o.cy + frame * o.vy;
    double a = o.angle + frame * o.omega;
    double dx = px - cx, dy = py - cy;
    double ca = std::cos(a), sa = std::sin(a);
    double lx = ca * dx + sa * dy, ly = -sa * dx + ca * dy;
    switch (o.kind) {
        case ShapeKind::disc: return lx * lx + ly * ly <= o.radius * o.radius;
        case ShapeKind::rect: return std::abs(lx) <= o.radius && std::abs(ly) <= o.radius * o.aspect;
        case ShapeKind::triangle: {
            double vx[3], vy[3];
            for (int k = 0; k < 3; ++k) {
                double t = kPi / 2 + k * 2.0 * kPi / 3.0;
                vx[k] = o.radius * std::cos(t);
                vy[k] = o.radius * std::sin(t);
            }
            // Counter-clockwise vertices: inside iff all edge cross products are >= 0.
            for (int k = 0; k < 3; ++k) {
                int n = (k + 1) % 3;
                double cross = (vx[n] - vx[k]) * (ly - vy[k]) - (vy[n] - vy[k]) * (lx - vx[k]);
                if (cross < 0) return false;
            }
            return true;
        }
    }
    return false;
}

/// Rasterizes frame `frame` into pixels [3,H,W]; returns the visible-object map.
std::vector<int> render(const Scene& s, int size, int frame, double* pixels) {
    std::vector<int> order(s.objects.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s.objects[a].depth < s.objects[b].depth; });

    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<int> map(plane, -1);
    double ct = std::cos(s.bg.theta), st = std::sin(s.bg.theta);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * size + x;
            for (int idx : order)
                if (contains(s.objects[idx], frame, x, y)) {
                    map[p] = idx;
                    break;
                }
            Color c;
            if (map[p] >= 0) {
                c = s.objects[map[p]].color;
            } else {
                double t = ((x - size / 2.0) * ct + (y - size / 2.0) * st) / (size * 0.75) + 0.5;
                t = std::clamp(t, 0.0, 1.0);
                for (int ch = 0; ch < 3; ++ch) c[ch] = (1 - t) * s.bg.c0[ch] + t * s.bg.c1[ch];
            }
            for (int ch = 0; ch < 3; ++ch) pixels[ch * plane + p] = c[ch];
        }
    return map;
}

std::shared_ptr<SceneInfo> scene_info(const Scene& s, int size, std::vector<int> map) {
    auto info = std::make_shared<SceneInfo>();
    info->height = info->width = size;
    info->objects = s.objects;
    info->object_map = std::move(map);
    return info;
}

std::vector<Color> palette_from(Rng& rng, StyleFamily family) {
    const int f = static_cast<int>(family);
    const double hue = f * 0.25 + rng.uniform(-0.08, 0.08);
    const int n = family == StyleFamily::blocks ? 4 : 3;
    std::vector<Color> p;
    for (int i = 0; i < n; ++i)
        p.push_back(hsv_color(hue + rng.uniform(-0.1, 0.1), rng.uniform(0.4, 1.0), rng.uniform(0.25, 1.0)));
    return p;
}

Color mix(const Color& a, const Color& b, double t) {
    return {(1 - t) * a[0] + t * b[0], (1 - t) * a[1] + t * b[1], (1 - t) * a[2] + t * b[2]};
}

Tensor luminance(const Tensor& px) {
    const int h = px.dim(1), w = px.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor l({h, w});
    for (std::size_t p = 0; p < plane; ++p)
        l[p] = 0.299 * px[p] + 0.587 * px[plane + p] + 0.114 * px[2 * plane + p];
    return l;
}

double at_clamped(const Tensor& t, int y, int x) {
    y = std::clamp(y, 0, t.dim(0) - 1);
    x = std::clamp(x, 0, t.dim(1) - 1);
    return t[static_cast<std::size_t>(y) * t.dim(1) + x];
}

Tensor box_blur(const Tensor& t, int radius) {
    Tensor out(t.shape());
    const int h = t.dim(0), w = t.dim(1);
    const double norm = 1.0 / ((2 * radius + 1) * (2 * radius + 1));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) s += at_clamped(t, y + dy, x + dx);
            out[static_cast<std::size_t>(y) * w + x] = s * norm;
        }
    return out;
}

void normalize_unit(Tensor& t) {
    auto [lo, hi] = std::minmax_element(t.storage().begin(), t.storage().end());
    double a = *lo, b = *hi;
    if (b - a < 1e-12) {
        t.fill(0.0);
        return;
    }
    for (double& v : t.storage()) v = (v - a) / (b - a);
}

Tensor quantize_colors(const Tensor& px) {
    const int h = px.dim(1), w = px.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    auto color_at = [&](std::size_t p) { return Color{px[p], px[plane + p], px[2 * plane + p]}; };
    auto dist2 = [](const Color& a, const Color& b) {
        return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
    };

    // Farthest-point initialization from the pixel nearest the mean color.
    Color mean{};
    for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) mean[c] += px[c * plane + p] / plane;
    std::vector<Color> centers;
    std::size_t first = 0;
    for (std::size_t p = 1; p < plane; ++p)
        if (dist2(color_at(p), mean) < dist2(color_at(first), mean)) first = p;
    centers.push_back(color_at(first));
    std::vector<double> nearest(plane);
    while (centers.size() < 8) {
        std::size_t best = 0;
        double best_d = -1;
        for (std::size_t p = 0; p < plane; ++p) {
            double d = 1e300;
            for (const Color& c : centers) d = std::min(d, dist2(color_at(p), c));
            if (d > best_d) best_d = d, best = p;
        }
        if (best_d < 1e-12) break;
        centers.push_back(color_at(best));
    }

    std::vector<int> assign(plane, 0);
    for (int iter = 0; iter < 10; ++iter) {
        for (std::size_t p = 0; p < plane; ++p) {
            double best = 1e300;
            for (std::size_t k = 0; k < centers.size(); ++k) {
                double d = dist2(color_at(p), centers[k]);
                if (d < best) best = d, assign[p] = static_cast<int>(k);
            }
        }
        std::vector<Color> sum(centers.size(), Color{});
        std::vector<int> cnt(centers.size(), 0);
        for (std::size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) sum[assign[p]][c] += px[c * plane + p];
            ++cnt[assign[p]];
        }
        for (std::size_t k = 0; k < centers.size(); ++k)
            if (cnt[k] > 0)
                for (int c = 0; c < 3; ++c) centers[k][c] = sum[k][c] / cnt[k];
    }

    std::vector<int> order(centers.size());
    std::iota(order.begin(), order.end(), 0);
    auto lum = [](const Color& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lum(centers[a]) < lum(centers[b]); });
    std::vector<int> label_of(centers.size());
    for (std::size_t i = 0; i < order.size(); ++i) label_of[order[i]] = static_cast<int>(i);

    Tensor out({1, h, w});
    for (std::size_t p = 0; p < plane; ++p) out[p] = label_of[assign[p]] / 7.0;
    return out;
}

}  // namespace

std::string to_string(StyleFamily family) {
    switch (family) {
        case StyleFamily::stripes: return "stripes";
        case StyleFamily::stippling: return "stippling";
        case StyleFamily::swirls: return "swirls";
        case StyleFamily::blocks: return "blocks";
    }
    return "?";
}

Image gen_content_image(std::uint64_t seed, int size, int factor) {
    check_size(size, factor);
    Rng rng(derive_seed(seed, "scene"));
    Scene s = random_scene(rng, size);
    Image img;
    img.pixels = Tensor({3, size, size});
    img.scene = scene_info(s, size, render(s, size, 0, img.pixels.data()));
    img.id = "content-" + std::to_string(seed);
    return img;
}

StyleFamily style_family_for(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "style"));
    return static_cast<StyleFamily>(rng.randint(0, kStyleFamilyCount - 1));
}

std::vector<Color> style_palette(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "style"));
    auto family = static_cast<StyleFamily>(rng.randint(0, kStyleFamilyCount - 1));
    return palette_from(rng, family);
}

Image gen_style_image(std::uint64_t seed, int size, int factor) {
    check_size(size, factor);
    Rng rng(derive_seed(seed, "style"));
    auto family = static_cast<StyleFamily>(rng.randint(0, kStyleFamilyCount - 1));
    const std::vector<Color> pal = palette_from(rng, family);

    Image img;
    img.pixels = Tensor({3, size, size});
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    auto put = [&](int x, int y, const Color& c) {
        for (int ch = 0; ch < 3; ++ch) img.pixels[ch * plane + static_cast<std::size_t>(y) * size + x] = c[ch];
    };

    switch (family) {
        case StyleFamily::stripes: {
            double f = rng.randint(2, 5), th = rng.uniform(0, kPi), ph = rng.uniform(0, 2 * kPi);
            double g = rng.randint(1, 3), th2 = rng.uniform(0, kPi);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double proj = x * std::cos(th) + y * std::sin(th);
                    double t = std::clamp(0.5 + 1.5 * std::sin(2 * kPi * f * proj / size + ph), 0.0, 1.0);
                    double proj2 = x * std::cos(th2) + y * std::sin(th2);
                    double u = 0.35 * (0.5 + 0.5 * std::sin(2 * kPi * g * proj2 / size));
                    put(x, y, mix(mix(pal[0], pal[1], t), pal[2], u));
                }
            break;
        }
        case StyleFamily::stippling: {
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) put(x, y, pal[0]);
            int dots = size * size / 12;
            for (int d = 0; d < dots; ++d) {
                double cx = rng.uniform(0, size), cy = rng.uniform(0, size), r = rng.uniform(0.8, 2.0);
                const Color& c = pal[1 + rng.randint(0, static_cast<int>(pal.size()) - 2)];
                for (int y = std::max(0, int(cy - r) - 1); y <= std::min(size - 1, int(cy + r) + 1); ++y)
                    for (int x = std::max(0, int(cx - r) - 1); x <= std::min(size - 1, int(cx + r) + 1); ++x)
                        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(x, y, c);
            }
            break;
        }
        case StyleFamily::swirls: {
            double cx = rng.uniform(0.3, 0.7) * size, cy = rng.uniform(0.3, 0.7) * size;
            double k = rng.randint(2, 5), freq = rng.uniform(0.3, 0.7) * 32.0 / size, ph = rng.uniform(0, 2 * kPi);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double r = std::hypot(x - cx, y - cy), a = std::atan2(y - cy, x - cx);
                    double t = 0.5 + 0.5 * std::sin(k * a + freq * r + ph);
                    double u = 0.5 * std::clamp(r / (size * 0.7), 0.0, 1.0);
                    put(x, y, mix(mix(pal[0], pal[1], t), pal[2], u));
                }
            break;
        }
        case StyleFamily::blocks: {
            int cells = rng.randint(2, 4);
            std::vector<int> color_of(cells * cells);
            for (int& c : color_of) c = rng.randint(0, static_cast<int>(pal.size()) - 1);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) put(x, y, pal[color_of[(y * cells / size) * cells + x * cells / size]]);
            break;
        }
    }
    img.style_family = static_cast<int>(family);
    img.id = "style-" + to_string(family) + "-" + std::to_string(seed);
    return img;
}

VideoClip gen_video_clip(std::uint64_t seed, int frames, int size, const VideoOptions& opts, int factor) {
    if (frames < 2) throw ArgumentError("video clip needs at least 2 frames, got " + std::to_string(frames));
    check_size(size, factor);
    Rng scene_rng(derive_seed(seed, "scene"));
    Scene s = random_scene(scene_rng, size);
    Rng motion(derive_seed(seed, "motion"));
    const int speed = std::clamp(opts.max_speed, 0, std::max(1, size / 16));
    for (SceneObject& o : s.objects) {
        o.vx = motion.randint(-speed, speed);
        o.vy = motion.randint(-speed, speed);
        o.omega = motion.uniform(-0.06, 0.06);
        if (opts.static_scene) o.vx = o.vy = 0.0;
        if (opts.static_scene || !opts.rotation) o.omega = 0.0;
    }

    VideoClip clip;
    clip.id = "clip-" + std::to_string(seed);
    clip.frames = Tensor({frames, 3, size, size});
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<std::vector<int>> maps;
    for (int k = 0; k < frames; ++k) {
        maps.push_back(render(s, size, k, clip.frames.data() + k * 3 * plane));
        clip.scenes.push_back(scene_info(s, size, maps.back()));
    }

    Tensor flows({frames - 1, 2, size, size});
    Tensor occ({frames - 1, size, size});
    for (int k = 0; k + 1 < frames; ++k) {
        double* fx = flows.data() + k * 2 * plane;
        double* fy = fx + plane;
        double* valid = occ.data() + k * plane;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * size + x;
                const int id = maps[k][p];
                double qx = x, qy = y;
                if (id >= 0) {
                    const SceneObject& o = s.objects[id];
                    double cx = o.cx + k * o.vx, cy = o.cy + k * o.vy;
                    double c = std::cos(o.omega), sn = std::sin(o.omega);
                    double dx = x - cx, dy = y - cy;
                    qx = cx + o.vx + c * dx - sn * dy;
                    qy = cy + o.vy + sn * dx + c * dy;
                }
                fx[p] = qx - x;
                fy[p] = qy - y;

                bool ok = qx >= 0 && qy >= 0 && qx <= size - 1 && qy <= size - 1;
                if (ok) {
                    int x0 = static_cast<int>(std::floor(qx)), y0 = static_cast<int>(std::floor(qy));
                    double ax = qx - x0, ay = qy - y0;
                    for (int j = 0; j < 2 && ok; ++j)
                        for (int i = 0; i < 2 && ok; ++i) {
                            double wgt = (i ? ax : 1 - ax) * (j ? ay : 1 - ay);
                            if (wgt <= 0) continue;
                            int sx = std::min(x0 + i, size - 1), sy = std::min(y0 + j, size - 1);
                            ok = maps[k + 1][static_cast<std::size_t>(sy) * size + sx] == id;
                        }
                }
                valid[p] = ok ? 1.0 : 0.0;
            }
    }
    clip.flows = std::move(flows);
    clip.occlusion = std::move(occ);
    return clip;
}

ControlMap annotate(const Image& image, ControlKind kind) {
    validate_image(image, 0);
    const int h = image.height(), w = image.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    ControlMap cm;
    cm.kind = kind;
    cm.map = Tensor({1, h, w});
    const SceneInfo* scene = image.scene.get();
    if (scene && (scene->height != h || scene->width != w)) scene = nullptr;

    switch (kind) {
        case ControlKind::edge: {
            Tensor l = luminance(image.pixels);
            double peak = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double gx = (at_clamped(l, y - 1, x + 1) + 2 * at_clamped(l, y, x + 1) + at_clamped(l, y + 1, x + 1)) -
                                (at_clamped(l, y - 1, x - 1) + 2 * at_clamped(l, y, x - 1) + at_clamped(l, y + 1, x - 1));
                    double gy = (at_clamped(l, y + 1, x - 1) + 2 * at_clamped(l, y + 1, x) + at_clamped(l, y + 1, x + 1)) -
                                (at_clamped(l, y - 1, x - 1) + 2 * at_clamped(l, y - 1, x) + at_clamped(l, y - 1, x + 1));
                    double m = std::hypot(gx, gy);
                    cm.map[static_cast<std::size_t>(y) * w + x] = m;
                    peak = std::max(peak, m);
                }
            if (peak < 1e-9)
                cm.map.fill(0.0);
            else
                for (double& v : cm.map.storage()) v /= peak;
            break;
        }
        case ControlKind::depth: {
            if (scene) {
                for (std::size_t p = 0; p < plane; ++p) {
                    int id = scene->object_map[p];
                    cm.map[p] = id < 0 ? 0.0 : 1.0 - scene->objects[id].depth;
                }
            } else {
                Tensor l = luminance(image.pixels);
                l = box_blur(box_blur(l, 2), 2);
                normalize_unit(l);
                cm.map = l.reshaped({1, h, w});
            }
            break;
        }
        case ControlKind::segmentation: {
            if (scene) {
                for (std::size_t p = 0; p < plane; ++p) {
                    int id = scene->object_map[p];
                    cm.map[p] = id < 0 ? 0.0 : std::min(scene->objects[id].label, 7) / 7.0;
                }
            } else {
                cm.map = quantize_colors(image.pixels);
            }
            break;
        }
    }
    return cm;
}

ImageDataset make_content_corpus(std::uint64_t seed, int count, int size) {
    ImageDataset ds;
    for (int i = 0; i < count; ++i) ds.items.push_back(gen_content_image(derive_seed(seed, "content-item", i), size));
    return ds;
}

ImageDataset make_style_corpus(std::uint64_t seed, int count, int size) {
    ImageDataset ds;
    for (int i = 0; i < count; ++i) ds.items.push_back(gen_style_image(derive_seed(seed, "style-item", i), size));
    return ds;
}

VideoDataset make_video_corpus(std::uint64_t seed, int count, int frames, int size) {
    VideoDataset ds;
    for (int i = 0; i < count; ++i)
        ds.items.push_back(gen_video_clip(derive_seed(seed, "video-item", i), frames, size));
    return ds;
}

}  // namespace hicast
