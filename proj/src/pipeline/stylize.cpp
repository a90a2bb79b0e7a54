// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/stylize.hpp"

#include "hicast/errors.hpp"
#include "hicast/ops.hpp"

namespace hicast {

AdapterPyramid adapter_features(const std::vector<AdapterInput>& inputs) {
    ag::NoGradGuard ng;
    std::vector<std::pair<AdapterPyramid, double>> parts;
    for (const AdapterInput& a : inputs) {
        if (!a.adapter) throw ArgumentError("adapter input without an adapter");
        parts.emplace_back(a.adapter->forward(Var(a.maps)), a.weight);
    }
    return combine(parts);
}

BranchFn make_branch_fn(const Conditioner& cond, const Backbone& unet, const Tensor& content_latents,
                        const Tensor& style_stats, const AdapterPyramid& adapters, int frames) {
    const int B = content_latents.dim(0);
    if (style_stats.dim(0) != B) throw ArgumentError("style statistics batch does not match the content batch");
    if (frames > 0 && !unet.temporal()) throw StateError("video sampling needs an inflated backbone");
    return [&cond, &unet, content_latents, style_stats, adapters, frames, B](const Tensor& z_t, int t, Branch br) {
        ag::NoGradGuard ng;
        const std::vector<int> ts(B, t);
        const bool null_content = br == Branch::style_only;
        const bool null_style = br == Branch::content_only;
        Var fc = cond.encode_content(Var(content_latents), ts, std::vector<bool>(B, null_content));
        Var emb = ops::add(cond.time_embedding(ts), cond.embed_style(Var(style_stats), std::vector<bool>(B, null_style)));
        Var eps = frames > 0 ? unet.predict_video(Var(z_t), fc, emb, frames, adapters)
                             : unet.predict(Var(z_t), fc, emb, adapters);
        return eps.value();
    };
}

Tensor control_maps(const Tensor& pixels, ControlKind kind) {
    std::vector<Tensor> maps;
    for (int i = 0; i < pixels.dim(0); ++i) {
        Image img;
        img.pixels = slice_leading(pixels, i, 1).reshaped({pixels.dim(1), pixels.dim(2), pixels.dim(3)});
        maps.push_back(annotate(img, kind).map);
    }
    return stack(maps);
}

Tensor stylize_latents(const FrozenModels& frozen, const ImageModel& model, const Backbone& unet,
                       const Tensor& content, const Tensor& style, const std::vector<AdapterInput>& adapters,
                       const StylizeSettings& s, const NoiseSchedule& schedule) {
    s.w.validate();
    const int B = content.dim(0);
    if (style.rank() != 4 || (style.dim(0) != 1 && style.dim(0) != B))
        throw ArgumentError("style must be [1 or B, 3, H, W]");
    Tensor stats;
    {
        ag::NoGradGuard ng;
        stats = style_stats(Var(style), frozen.features).value();
    }
    if (stats.dim(0) != B) stats = gather_rows(stats, std::vector<int>(B, 0));
    const Tensor lat = frozen.codec.encode_tensor(content);
    const AdapterPyramid pyr = adapter_features(adapters);
    const BranchFn fn = make_branch_fn(model.cond, unet, lat, stats, pyr, unet.temporal() ? B : 0);
    return sample(schedule, fn, lat.shape(), s.w, s.sampler);
}

Tensor stylize(const FrozenModels& frozen, const ImageModel& model, const Backbone& unet, const Tensor& content,
               const Tensor& style, const std::vector<AdapterInput>& adapters, const StylizeSettings& s,
               const NoiseSchedule& schedule) {
    return frozen.codec.decode_tensor(stylize_latents(frozen, model, unet, content, style, adapters, s, schedule));
}

}  // namespace hicast
