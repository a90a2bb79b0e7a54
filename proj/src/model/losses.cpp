// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/losses.hpp"

#include <cmath>
#include <cstdlib>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"

namespace hicast {

void LossWeights::validate() const {
    for (double v : {lambda_c, lambda_s, lambda_g, lambda_pg, lambda_hg1, lambda_hg2, lambda_hl})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
    if (!(tau > 0.0)) throw ConfigError("contrastive temperature must be > 0");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = {{"lambda_c", w.lambda_c},     {"lambda_s", w.lambda_s},     {"lambda_g", w.lambda_g},
         {"lambda_pg", w.lambda_pg},   {"lambda_hg1", w.lambda_hg1}, {"lambda_hg2", w.lambda_hg2},
         {"lambda_hl", w.lambda_hl},   {"tau", w.tau},               {"squared", w.squared}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    w.lambda_c = j.value("lambda_c", w.lambda_c);
    w.lambda_s = j.value("lambda_s", w.lambda_s);
    w.lambda_g = j.value("lambda_g", w.lambda_g);
    w.lambda_pg = j.value("lambda_pg", w.lambda_pg);
    w.lambda_hg1 = j.value("lambda_hg1", w.lambda_hg1);
    w.lambda_hg2 = j.value("lambda_hg2", w.lambda_hg2);
    w.lambda_hl = j.value("lambda_hl", w.lambda_hl);
    w.tau = j.value("tau", w.tau);
    w.squared = j.value("squared", w.squared);
}

Var norm_l2(const Var& diff, bool squared) { return squared ? ops::mean_square(diff) : ops::rms(diff); }

Var content_loss(const Var& eps, const Var& eps_hat, const LossWeights& w) {
    if (eps.shape() != eps_hat.shape())
        throw ArgumentError("content_loss: " + shape_str(eps.shape()) + " vs " + shape_str(eps_hat.shape()));
    return ops::scale(norm_l2(ops::sub(eps, eps_hat), w.squared), w.lambda_c);
}

std::vector<std::pair<Var, Var>> feature_moments(const Var& images, const FeatureNet& net) {
    std::vector<std::pair<Var, Var>> out;
    for (const Var& f : net.features(images))
        out.emplace_back(ops::global_avg_pool(f), ops::sqrt_eps(ops::channel_variance(f), 1e-5));
    return out;
}

Var style_loss(const Var& out_images, const Var& style_images, const FeatureNet& net, const LossWeights& w) {
    if (out_images.shape() != style_images.shape())
        throw ArgumentError("style_loss: " + shape_str(out_images.shape()) + " vs " + shape_str(style_images.shape()));
    const auto a = feature_moments(out_images, net);
    const auto b = feature_moments(style_images, net);
    Var total;
    for (std::size_t l = 0; l < a.size(); ++l) {
        Var term = ops::add(norm_l2(ops::sub(a[l].first, b[l].first), w.squared),
                            norm_l2(ops::sub(a[l].second, b[l].second), w.squared));
        total = l == 0 ? term : ops::add(total, term);
    }
    return ops::scale(total, w.lambda_s);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"base_channels", c.base_channels}, {"reference_crops", c.reference_crops}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.base_channels = j.value("base_channels", c.base_channels);
    c.reference_crops = j.value("reference_crops", c.reference_crops);
}

Discriminators::Discriminators(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    if (cfg_.base_channels < 1 || cfg_.reference_crops < 1) throw ConfigError("invalid discriminator config");
    Rng rng(derive_seed(seed, "disc-init"));
    const int b = cfg_.base_channels;
    image_convs_.emplace_back(params_, "image.conv0", 3, b, 3, 1, rng);
    image_convs_.emplace_back(params_, "image.conv1", b, 2 * b, 3, 2, rng);
    image_convs_.emplace_back(params_, "image.conv2", 2 * b, 4 * b, 3, 2, rng);
    image_head_ = nn::Linear(params_, "image.head", 4 * b, 1, rng);
    patch_convs_.emplace_back(params_, "patch.conv0", 3, b, 3, 1, rng);
    patch_convs_.emplace_back(params_, "patch.conv1", b, 2 * b, 3, 2, rng);
    patch_convs_.emplace_back(params_, "patch.conv2", 2 * b, 2 * b, 3, 2, rng);
    patch_fc0_ = nn::Linear(params_, "patch.fc0", 4 * b, 4 * b, rng);
    patch_fc1_ = nn::Linear(params_, "patch.fc1", 4 * b, 1, rng);
}

Var Discriminators::image_logits(const Var& images) const {
    Var x = images;
    for (const auto& c : image_convs_) x = ops::silu(c(x));
    return image_head_(ops::global_avg_pool(x));
}

Var Discriminators::patch_code(const Var& crops) const {
    Var x = crops;
    for (const auto& c : patch_convs_) x = ops::silu(c(x));
    return ops::global_avg_pool(x);
}

Var Discriminators::patch_logits(const Var& crops, const Var& refs) const {
    const int b = crops.dim(0), r = cfg_.reference_crops, d = 2 * cfg_.base_channels;
    if (refs.dim(0) != b * r)
        throw ArgumentError("patch discriminator expects " + std::to_string(r) + " reference crops per sample");
    Var ref = ops::reshape(ops::permute(ops::reshape(patch_code(refs), {b, r, d}), {0, 2, 1}), {b, d, r, 1});
    Var joint = ops::concat({patch_code(crops), ops::global_avg_pool(ref)}, 1);
    return patch_fc1_(ops::silu(patch_fc0_(joint)));
}

void Discriminators::save(const std::filesystem::path& dir, long step) const {
    CheckpointInfo info;
    info.module = "discriminators";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    save_checkpoint(dir, info, params_.snapshot());
}

Discriminators Discriminators::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "discriminators") throw FormatError(dir.string() + " is not a discriminator checkpoint");
    Discriminators d(ck.info.config.get<DiscriminatorConfig>(), ck.info.seed);
    d.params_.load(ck.tensors);
    return d;
}

CropPlan plan_crops(int batch, int height, int width, int refs, Rng& rng) {
    if (height < 4 || width < 4) throw ArgumentError("image smaller than the discriminator crop");
    CropPlan p;
    p.size = std::min(height, width) / 4;
    auto draw = [&](int n) {
        return ops::Window{n, rng.randint(0, height - p.size), rng.randint(0, width - p.size)};
    };
    for (int n = 0; n < batch; ++n) {
        p.out.push_back(draw(n));
        p.real.push_back(draw(n));
        for (int r = 0; r < refs; ++r) p.refs.push_back(draw(n));
    }
    return p;
}

namespace {

Var neg(const Var& x) { return ops::scale(x, -1.0); }

}  // namespace

namespace {

void check_gan_inputs(const Var& out_images, const Var& style_images, const CropPlan& crops) {
    if (out_images.shape() != style_images.shape())
        throw ArgumentError("gan_losses: " + shape_str(out_images.shape()) + " vs " + shape_str(style_images.shape()));
    const int h = out_images.dim(2), wd = out_images.dim(3);
    if (h < 4 || wd < 4 || crops.size < 1 || crops.size > std::min(h, wd))
        throw ArgumentError("image smaller than the discriminator crop");
}

}  // namespace

GanTerms generator_gan_terms(const Var& out_images, const Var& style_images, const Discriminators& d,
                             const CropPlan& crops, const LossWeights& w) {
    check_gan_inputs(out_images, style_images, crops);
    const Var refs = ops::crop_windows(style_images, crops.refs, crops.size);
    GanTerms g;
    g.g_loss = ops::scale(ops::add_scalar(ops::sub(ops::mean(ops::log_sigmoid(d.image_logits(style_images))),
                                                   ops::mean(ops::log_sigmoid(d.image_logits(out_images)))),
                                          1.0),
                          w.lambda_g);
    const Var fake_patch = d.patch_logits(ops::crop_windows(out_images, crops.out, crops.size), refs);
    g.patch_g = ops::scale(neg(ops::mean(ops::log_sigmoid(fake_patch))), w.lambda_pg);
    return g;
}

GanTerms discriminator_gan_terms(const Var& out_images, const Var& style_images, const Discriminators& d,
                                 const CropPlan& crops) {
    check_gan_inputs(out_images, style_images, crops);
    const Var fake = out_images.detach();
    const Var refs = ops::crop_windows(style_images, crops.refs, crops.size);
    GanTerms g;
    g.d_loss = neg(ops::add(ops::mean(ops::log_sigmoid(d.image_logits(style_images))),
                            ops::mean(ops::log_sigmoid(neg(d.image_logits(fake))))));
    const Var real_patch = d.patch_logits(ops::crop_windows(style_images, crops.real, crops.size), refs);
    const Var fake_patch = d.patch_logits(ops::crop_windows(fake, crops.out, crops.size), refs);
    g.patch_d = neg(ops::add(ops::mean(ops::log_sigmoid(real_patch)), ops::mean(ops::log_sigmoid(neg(fake_patch)))));
    return g;
}

GanTerms gan_losses(const Var& out_images, const Var& style_images, const Discriminators& d, const CropPlan& crops,
                    const LossWeights& w) {
    GanTerms g = generator_gan_terms(out_images, style_images, d, crops, w);
    GanTerms dt = discriminator_gan_terms(out_images, style_images, d, crops);
    g.d_loss = dt.d_loss;
    g.patch_d = dt.patch_d;
    return g;
}

Var patch_contrastive(const Var& v, const Var& pos, const Var& negs, double tau) {
    if (v.shape().size() != 2 || pos.shape() != v.shape() || negs.shape().size() != 3 || negs.dim(0) != v.dim(0) ||
        negs.dim(2) != v.dim(1))
        throw ArgumentError("patch_contrastive: expected v,pos [M,D] and neg [M,K,D]");
    if (!(tau > 0.0)) throw ArgumentError("patch_contrastive: tau must be > 0");
    const int m = v.dim(0), d = v.dim(1), k = negs.dim(1);
    const Var q = ops::reshape(v, {m, 1, d});
    const Var sp = ops::bmm(q, ops::reshape(pos, {m, 1, d}), true);  // [M,1,1]
    const Var sn = ops::bmm(q, negs, true);                           // [M,1,K]
    const Var logits = ops::scale(ops::reshape(ops::concat({sp, sn}, 2), {m, k + 1}), 1.0 / tau);
    return ops::scale(ops::cross_entropy(logits, std::vector<int>(m, 0)), m);
}

PatchLayout make_patch_layout(int height, int width, const PatchGeometry& g, std::uint64_t seed) {
    if (g.size < 1 || g.stride < 1 || g.size > height || g.size > width)
        throw ArgumentError("patch geometry does not fit a " + std::to_string(height) + "x" + std::to_string(width) +
                            " frame");
    const int far = height / 2;
    const int ymax = height - g.size, xmax = width - g.size;
    if (std::max(ymax, xmax) < far) throw ArgumentError("frame too small for non-local patches");
    if (g.neighbours != 8) throw ArgumentError("patch layout uses the 8 surrounding patches");
    PatchLayout layout;
    Rng rng(derive_seed(seed, "patch-layout"));
    auto reflect = [](int p, int d, int hi) {
        const int q = p + d;
        return (q < 0 || q > hi) ? p - d : q;
    };
    for (int y = 0; y <= ymax; y += g.stride)
        for (int x = 0; x <= xmax; x += g.stride) {
            layout.anchors.emplace_back(y, x);
            std::vector<std::pair<int, int>> n;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (dy || dx) n.emplace_back(reflect(y, dy * g.stride, ymax), reflect(x, dx * g.stride, xmax));
            while (static_cast<int>(n.size()) < 8 + g.nonlocal) {
                const int py = rng.randint(0, ymax), px = rng.randint(0, xmax);
                if (std::max(std::abs(py - y), std::abs(px - x)) >= far) n.emplace_back(py, px);
            }
            layout.negatives.push_back(std::move(n));
        }
    return layout;
}

namespace {

// Unit-normalized first-level features averaged over each patch: [N * P, C].
Var patch_features(const Var& frames, const FeatureNet& net, const std::vector<std::pair<int, int>>& corners,
                   int size) {
    const Var f = net.features(frames).front();
    const Var p = ops::patch_average(f, corners, size);
    return ops::l2_normalize_rows(ops::reshape(p, {p.dim(0) * p.dim(1), p.dim(2)}));
}

}  // namespace

HarmoniousTerms harmonious_loss(const Var& eps_hat, const Tensor& eps, const Tensor& eps_image, const Var& out_frames,
                                const Tensor& content_frames, const FeatureNet& net, const PatchLayout& layout,
                                const PatchGeometry& g, const LossWeights& w) {
    const int n = eps_hat.dim(0);
    if (eps.shape() != eps_hat.shape() || eps_image.shape() != eps_hat.shape())
        throw ArgumentError("harmonious_loss: noise tensors disagree in shape");
    if (out_frames.dim(0) != n || content_frames.dim(0) != n)
        throw ArgumentError("harmonious_loss: frame counts differ (" + std::to_string(n) + " noise frames, " +
                            std::to_string(out_frames.dim(0)) + " output, " + std::to_string(content_frames.dim(0)) +
                            " content)");
    if (out_frames.shape() != content_frames.shape()) throw ArgumentError("harmonious_loss: frame shapes differ");

    HarmoniousTerms h;
    h.global_noise = ops::scale(norm_l2(ops::sub(Var(eps), eps_hat), w.squared), w.lambda_hg1);
    const Var eps_i(eps_image);
    Var per_frame;
    for (int i = 0; i < n; ++i) {
        Var term = norm_l2(ops::sub(ops::slice_leading(eps_hat, i, 1), ops::slice_leading(eps_i, i, 1)), w.squared);
        per_frame = i == 0 ? term : ops::add(per_frame, term);
    }
    h.global_image = ops::scale(per_frame, w.lambda_hg2);

    const int a = static_cast<int>(layout.anchors.size());
    const int k = static_cast<int>(layout.negatives.front().size());
    std::vector<std::pair<int, int>> neg_corners;
    for (const auto& nn : layout.negatives) neg_corners.insert(neg_corners.end(), nn.begin(), nn.end());
    const Var v = patch_features(out_frames, net, layout.anchors, g.size);
    Var pos, negs;
    {
        ag::NoGradGuard ng;
        const Var content(content_frames);
        pos = Var(patch_features(content, net, layout.anchors, g.size).value());
        negs = Var(patch_features(content, net, neg_corners, g.size).value().reshaped({n * a, k, v.dim(1)}));
    }
    h.local = ops::scale(patch_contrastive(v, pos, negs, w.tau), w.lambda_hl);
    h.total = ops::add(ops::add(h.global_noise, h.global_image), h.local);
    return h;
}

}  // namespace hicast
