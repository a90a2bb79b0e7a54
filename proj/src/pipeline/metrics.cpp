// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/metrics.hpp"

#include <cmath>

#include "hicast/errors.hpp"
#include "hicast/synth.hpp"

namespace hicast {

namespace fs = std::filesystem;

Tensor gram_matrix(const Tensor& f) {
    if (f.rank() != 3) throw ArgumentError("gram_matrix expects [C, H, W]");
    const int C = f.dim(0);
    const std::size_t P = static_cast<std::size_t>(f.dim(1)) * f.dim(2);
    const double norm = static_cast<double>(C) * static_cast<double>(P);
    Tensor g({C, C});
    for (int a = 0; a < C; ++a)
        for (int b = a; b < C; ++b) {
            const double* x = f.data() + a * P;
            const double* y = f.data() + b * P;
            double s = 0.0;
            for (std::size_t p = 0; p < P; ++p) s += x[p] * y[p];
            g.at({a, b}) = g.at({b, a}) = s / norm;
        }
    return g;
}

namespace {

void check_levels(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size() || a.empty()) throw ArgumentError("feature level counts differ");
    for (std::size_t l = 0; l < a.size(); ++l)
        if (a[l].dim(0) != b[l].dim(0)) throw ArgumentError("feature channel counts differ");
}

double mse(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.numel());
}

Tensor unit_channels(const Tensor& f) {
    const int C = f.dim(0);
    const std::size_t P = static_cast<std::size_t>(f.dim(1)) * f.dim(2);
    Tensor out(f.shape());
    for (std::size_t p = 0; p < P; ++p) {
        double n = 0.0;
        for (int c = 0; c < C; ++c) n += f[c * P + p] * f[c * P + p];
        n = std::sqrt(n) + 1e-10;
        for (int c = 0; c < C; ++c) out[c * P + p] = f[c * P + p] / n;
    }
    return out;
}

}  // namespace

double gram_loss(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    check_levels(a, b);
    double s = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) s += mse(gram_matrix(a[l]), gram_matrix(b[l]));
    return s;
}

double perceptual_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    check_levels(a, b);
    double s = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        if (a[l].shape() != b[l].shape()) throw ArgumentError("perceptual_distance: feature shapes differ");
        s += mse(unit_channels(a[l]), unit_channels(b[l]));
    }
    return s / static_cast<double>(a.size());
}

std::vector<Tensor> image_features(const Tensor& pixels, const FeatureNet& net) {
    if (pixels.rank() != 3 || pixels.dim(0) != 3) throw ArgumentError("image_features expects [3, H, W]");
    ag::NoGradGuard ng;
    std::vector<Tensor> out;
    for (const Var& f : net.features(Var(pixels.reshaped({1, 3, pixels.dim(1), pixels.dim(2)})))) {
        const Shape& s = f.shape();
        out.push_back(f.value().reshaped({s[1], s[2], s[3]}));
    }
    return out;
}

double gram_loss(const Image& out, const Image& style, const FeatureNet& net) {
    return gram_loss(image_features(out.pixels, net), image_features(style.pixels, net));
}

double perceptual_distance(const Image& a, const Image& b, const FeatureNet& net) {
    if (a.pixels.shape() != b.pixels.shape()) throw ArgumentError("perceptual_distance: image sizes differ");
    return perceptual_distance(image_features(a.pixels, net), image_features(b.pixels, net));
}

ComposedFlow compose_flow(const Tensor& flows, const Tensor& occlusion, int t, int gap) {
    const int pairs = flows.dim(0);
    if (gap < 1 || t < 0 || t + gap > pairs) throw ArgumentError("compose_flow: frame range out of bounds");
    const int H = flows.dim(2), W = flows.dim(3);
    const std::size_t P = static_cast<std::size_t>(H) * W;
    ComposedFlow c;
    c.flow = slice_leading(flows, t, 1).reshaped({2, H, W});
    c.valid = slice_leading(occlusion, t, 1).reshaped({H, W});
    for (int k = 1; k < gap; ++k) {
        const Tensor next = slice_leading(flows, t + k, 1).reshaped({2, H, W});
        const Tensor occ = slice_leading(occlusion, t + k, 1).reshaped({1, H, W});
        const Tensor step = warp(next, c.flow);
        const Tensor ok = warp(occ, c.flow);
        for (std::size_t p = 0; p < P; ++p) {
            const double x = static_cast<double>(p % W) + c.flow[p];
            const double y = static_cast<double>(p / W) + c.flow[P + p];
            // Occlusion accumulates: a pixel is lost once any step is occluded.
            const bool inside = x >= 0 && y >= 0 && x <= W - 1 && y <= H - 1;
            if (!inside || ok[p] < 1.0 - 1e-9) c.valid[p] = 0.0;
        }
        for (std::size_t p = 0; p < 2 * P; ++p) c.flow[p] += step[p];
    }
    return c;
}

double temporal_loss(const Tensor& frames, const Tensor& flows, const Tensor& occlusion, int i) {
    if (frames.rank() != 4) throw ArgumentError("temporal_loss expects frames [N, C, H, W]");
    const int N = frames.dim(0), C = frames.dim(1), H = frames.dim(2), W = frames.dim(3);
    if (i < 1 || i >= N) throw ArgumentError("temporal_loss: gap " + std::to_string(i) + " needs more than " +
                                             std::to_string(i) + " frames, got " + std::to_string(N));
    if (flows.shape() != Shape{N - 1, 2, H, W} || occlusion.shape() != Shape{N - 1, H, W})
        throw ArgumentError("temporal_loss: flow/occlusion shapes do not match the frames");
    const std::size_t P = static_cast<std::size_t>(H) * W;
    double total = 0.0;
    int counted = 0;
    for (int t = i; t < N; ++t) {
        const ComposedFlow cf = compose_flow(flows, occlusion, t - i, i);
        const Tensor prev = slice_leading(frames, t - i, 1).reshaped({C, H, W});
        const Tensor back = warp(slice_leading(frames, t, 1).reshaped({C, H, W}), cf.flow);
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < P; ++p) {
            if (cf.valid[p] < 0.5) continue;
            for (int c = 0; c < C; ++c) {
                const double d = prev[c * P + p] - back[c * P + p];
                s += d * d;
            }
            n += C;
        }
        if (n == 0) continue;
        total += s / static_cast<double>(n);
        ++counted;
    }
    return counted ? std::sqrt(total / counted) : 0.0;
}

double temporal_loss(const Tensor& frames, const VideoClip& source, int i) {
    if (!source.has_flow()) throw StateError("temporal metric requires flows");
    return temporal_loss(frames, *source.flows, *source.occlusion, i);
}

namespace {

nlohmann::json summary(const std::vector<std::pair<std::string, double>>& items) {
    nlohmann::json list = nlohmann::json::array();
    double s = 0.0;
    for (const auto& [id, v] : items) {
        list.push_back({{"id", id}, {"value", v}});
        s += v;
    }
    return {{"mean", items.empty() ? nlohmann::json(nullptr) : nlohmann::json(s / items.size())}, {"items", list}};
}

nlohmann::json missing(const std::string& reason) { return {{"mean", nullptr}, {"reason", reason}}; }

}  // namespace

nlohmann::json eval_report(const EvalInputs& in, const FeatureNet& net) {
    // Loose PNGs are one sequence of frames; otherwise each subdirectory is a clip.
    VideoDataset pred;
    std::vector<Image> frames = load_image_folder(in.pred_dir).items;
    if (!frames.empty()) {
        VideoClip clip;
        clip.id = in.pred_dir.filename().string();
        std::vector<Tensor> px;
        for (const Image& f : frames) px.push_back(f.pixels);
        bool same = true;
        for (const Tensor& t : px) same = same && t.shape() == px.front().shape();
        if (same) {
            clip.frames = stack(px);
            pred.items.push_back(std::move(clip));
        }
    } else {
        pred = load_video_folder(in.pred_dir);
        for (const VideoClip& c : pred.items)
            for (int k = 0; k < c.frame_count(); ++k) {
                Image img = c.frame(k);
                img.id = c.id + "/" + std::to_string(k);
                frames.push_back(std::move(img));
            }
    }

    nlohmann::json r;
    r["schema"] = kEvalSchema;
    r["pred_dir"] = in.pred_dir.string();
    r["frames"] = frames.size();
    if (in.style) {
        Image style;
        style.pixels = read_png(*in.style);
        style.id = in.style->stem().string();
        const std::vector<Tensor> sf = image_features(style.pixels, net);
        std::vector<std::pair<std::string, double>> g, p;
        for (const Image& f : frames) {
            const std::vector<Tensor> ff = image_features(f.pixels, net);
            g.emplace_back(f.id, gram_loss(ff, sf));
            if (f.pixels.shape() == style.pixels.shape()) p.emplace_back(f.id, perceptual_distance(ff, sf));
        }
        r["gram_loss"] = summary(g);
        r["perceptual"] = p.size() == frames.size() ? summary(p) : missing("style image size differs from outputs");
    } else {
        r["gram_loss"] = missing("no style image given");
        r["perceptual"] = missing("no style image given");
    }

    nlohmann::json temporal = nlohmann::json::object();
    std::optional<fs::path> flow_dir = in.flow_dir ? in.flow_dir : in.content_dir;
    std::optional<VideoDataset> flows;
    std::string why;
    if (!flow_dir) {
        why = "no content or flow directory given";
    } else {
        flows = load_video_folder(*flow_dir);
        if (flows->items.size() != pred.items.size()) {
            why = "prediction and flow folders hold different clip counts";
            flows.reset();
        } else {
            for (const VideoClip& c : flows->items)
                if (!c.has_flow()) {
                    why = "temporal metric requires flows";
                    flows.reset();
                    break;
                }
        }
    }
    for (int gap : in.gaps) {
        const std::string key = std::to_string(gap);
        if (!flows) {
            temporal[key] = missing(why);
            continue;
        }
        std::vector<std::pair<std::string, double>> items;
        std::string err;
        for (std::size_t c = 0; c < pred.items.size() && err.empty(); ++c) {
            const VideoClip& src = flows->items[c];
            if (pred.items[c].frame_count() != src.frame_count() || gap >= src.frame_count())
                err = "clip " + pred.items[c].id + " has too few frames for gap " + key;
            else
                items.emplace_back(pred.items[c].id, temporal_loss(pred.items[c].frames, src, gap));
        }
        temporal[key] = err.empty() ? summary(items) : missing(err);
    }
    r["temporal"] = temporal;
    return r;
}

}  // namespace hicast
