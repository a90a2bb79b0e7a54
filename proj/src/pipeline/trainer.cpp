// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/trainer.hpp"

#include <fstream>
#include <map>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"
#include "hicast/ops.hpp"

namespace hicast {

namespace fs = std::filesystem;

std::string to_string(SupervisionMode m) {
    switch (m) {
        case SupervisionMode::content_style: return "content_style";
        case SupervisionMode::style_style: return "style_style";
        case SupervisionMode::none_style: return "none_style";
        case SupervisionMode::content_none: return "content_none";
    }
    return "?";
}

SupervisionMode sample_supervision(Rng& rng, const SupervisionProbs& p) {
    p.validate();
    const double u = rng.uniform();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < 4; ++i) {
        if (p.p[i] <= 0.0) continue;
        last = i;
        acc += p.p[i];
        if (u < acc) return static_cast<SupervisionMode>(i);
    }
    return static_cast<SupervisionMode>(last);  // u landed in the rounding gap
}

// ---------------------------------------------------------------- data

namespace {

void attach_families(std::vector<Image>& styles, const fs::path& manifest) {
    if (!fs::exists(manifest)) return;
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad corpus manifest " + manifest.string() + ": " + e.what());
    }
    std::map<std::string, int> fam;
    for (const auto& s : j.value("styles", nlohmann::json::array()))
        if (s.contains("family")) fam[fs::path(s.at("file").get<std::string>()).stem().string()] = s.at("family").get<int>();
    for (Image& img : styles) {
        auto it = fam.find(img.id);
        if (it != fam.end()) img.style_family = it->second;
    }
}

}  // namespace

TrainingData load_training_data(const DataConfig& cfg) {
    TrainingData d;
    if (cfg.dir.empty()) {
        d.content = make_content_corpus(derive_seed(cfg.seed, "content"), cfg.content_images, cfg.size).items;
        d.style = make_style_corpus(derive_seed(cfg.seed, "style"), cfg.style_images, cfg.size).items;
        d.videos = make_video_corpus(derive_seed(cfg.seed, "video"), cfg.videos, cfg.frames, cfg.size).items;
    } else {
        d.content = load_image_folder(cfg.dir / "images").items;
        d.style = load_image_folder(cfg.dir / "styles").items;
        attach_families(d.style, cfg.dir / "manifest.json");
        if (fs::is_directory(cfg.dir / "videos")) d.videos = load_video_folder(cfg.dir / "videos").items;
    }
    // Held-out material is always synthesized from the data seed.
    const int nv = cfg.validation_images;
    d.content_validation = make_content_corpus(derive_seed(cfg.seed, "content-validation"), nv, cfg.size).items;
    d.style_validation = make_style_corpus(derive_seed(cfg.seed, "style-validation"), nv, cfg.size).items;
    d.video_validation =
        make_video_corpus(derive_seed(cfg.seed, "video-validation"), cfg.videos, cfg.frames, cfg.size).items;
    return d;
}

Codec train_stage0_codec(const PipelineConfig& cfg, const TrainingData& data, CodecTrainReport* report) {
    Codec codec(cfg.codec.model, cfg.codec.train.seed);
    std::vector<Image> all = data.content;
    all.insert(all.end(), data.style.begin(), data.style.end());
    CodecTrainReport r = train_codec(codec, all, cfg.codec.train);
    codec.params().set_trainable(false);
    if (report) *report = std::move(r);
    return codec;
}

FeatureNet train_stage0_features(const PipelineConfig& cfg, const TrainingData& data, FeatureTrainReport* report) {
    FeatureNet net(cfg.feature_net.model, cfg.feature_net.train.seed);
    FeatureTrainReport r = train_feature_net(net, data.style, data.style_validation, cfg.feature_net.train);
    if (report) *report = std::move(r);
    return net;
}

// ---------------------------------------------------------------- models

ImageModel::ImageModel(const PipelineConfig& cfg, std::uint64_t seed)
    : cond(cfg.conditioning(), derive_seed(seed, "cond")),
      unet(cfg.backbone, derive_seed(seed, "unet")),
      disc(cfg.discriminator, derive_seed(seed, "disc")) {}

ImageModel::ImageModel(Conditioner c, Backbone u, Discriminators d)
    : cond(std::move(c)), unet(std::move(u)), disc(std::move(d)) {}

void ImageModel::set_trainable(bool on) {
    cond.params().set_trainable(on);
    unet.params().set_trainable(on);
    disc.params().set_trainable(on);
}

void ImageModel::save(const fs::path& dir, long step) const {
    cond.save(dir / "cond", step);
    unet.save(dir / "unet", step);
    disc.save(dir / "disc", step);
}

ImageModel ImageModel::load(const fs::path& dir) {
    return ImageModel(Conditioner::load(dir / "cond"), Backbone::load(dir / "unet"),
                      Discriminators::load(dir / "disc"));
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx) {
    std::vector<Tensor> parts;
    parts.reserve(idx.size());
    for (int i : idx) {
        if (i < 0 || i >= t.dim(0)) throw ArgumentError("gather_rows: index out of range");
        parts.push_back(slice_leading(t, i, 1));
    }
    return concat_leading(parts);
}

namespace {

void require_frozen(const FrozenModels& f) {
    if (!f.codec.trained()) throw StateError("stage-0 codec checkpoint is missing or untrained");
    if (!f.features.frozen()) throw StateError("stage-0 feature net is missing or not frozen");
}

void freeze(FrozenModels& f) {
    require_frozen(f);
    f.codec.params().set_trainable(false);
    f.features.params().set_trainable(false);
}

Tensor encode_all(const Codec& codec, const Tensor& pixels) {
    // Chunked so peak memory stays small for large corpora.
    std::vector<Tensor> parts;
    for (int i = 0; i < pixels.dim(0); i += 64) {
        const int n = std::min(64, pixels.dim(0) - i);
        parts.push_back(codec.encode_tensor(slice_leading(pixels, i, n)));
    }
    return concat_leading(parts);
}

Tensor stats_all(const FeatureNet& net, const Tensor& pixels) {
    ag::NoGradGuard ng;
    std::vector<Tensor> parts;
    for (int i = 0; i < pixels.dim(0); i += 64) {
        const int n = std::min(64, pixels.dim(0) - i);
        parts.push_back(style_stats(Var(slice_leading(pixels, i, n)), net).value());
    }
    return concat_leading(parts);
}

}  // namespace

Corpus prepare_corpus(std::vector<Image> content, std::vector<Image> style, const FrozenModels& frozen) {
    require_frozen(frozen);
    if (content.empty() || style.empty()) throw ArgumentError("corpus needs content and style images");
    const int f = frozen.codec.config().factor;
    for (const Image& i : content) validate_image(i, f);
    for (const Image& i : style) validate_image(i, f);
    Corpus c;
    c.content = std::move(content);
    c.style = std::move(style);
    c.content_pixels = stack_pixels(c.content);
    c.style_pixels = stack_pixels(c.style);
    if (c.content_pixels.shape() != std::vector<int>{static_cast<int>(c.content.size()), 3, c.style_pixels.dim(2),
                                                     c.style_pixels.dim(3)})
        throw ArgumentError("content and style images must share one size");
    c.content_latents = encode_all(frozen.codec, c.content_pixels);
    c.style_latents = encode_all(frozen.codec, c.style_pixels);
    c.style_stats = stats_all(frozen.features, c.style_pixels);
    return c;
}

VideoCorpus prepare_video_corpus(std::vector<VideoClip> clips, const FrozenModels& frozen) {
    require_frozen(frozen);
    if (clips.empty()) throw ArgumentError("video corpus is empty");
    VideoCorpus v;
    v.frames = clips.front().frame_count();
    std::vector<Tensor> frames;
    for (const VideoClip& c : clips) {
        if (c.frames.shape() != clips.front().frames.shape())
            throw ArgumentError("video clips must share frame count and size");
        frames.push_back(c.frames);
    }
    v.clips = std::move(clips);
    v.pixels = concat_leading(frames);
    v.latents = encode_all(frozen.codec, v.pixels);
    return v;
}

// ---------------------------------------------------------------- batches

BatchItem build_batch_item(SupervisionMode mode, const Corpus& corpus, int content_index, int style_index, int t) {
    const int nc = static_cast<int>(corpus.content.size());
    const int ns = static_cast<int>(corpus.style.size());
    const bool uses_content = mode == SupervisionMode::content_style || mode == SupervisionMode::content_none;
    const bool uses_style = mode != SupervisionMode::content_none;
    if (uses_content && (content_index < 0 || content_index >= nc))
        throw ArgumentError("content index out of range");
    if (uses_style && (style_index < 0 || style_index >= ns)) throw ArgumentError("style index out of range");

    BatchItem b;
    b.mode = mode;
    b.timestep = t;
    b.content_index = uses_content ? content_index : -1;
    b.style_index = uses_style ? style_index : -1;
    const std::string cid = uses_content ? corpus.content[content_index].id : "";
    const std::string sid = uses_style ? corpus.style[style_index].id : "";
    switch (mode) {
        case SupervisionMode::content_style:
            b.content_input_id = cid;
            b.style_input_id = sid;
            b.target_id = cid;
            break;
        case SupervisionMode::style_style:
            b.content_input_id = sid;
            b.style_input_id = sid;
            b.target_id = sid;
            break;
        case SupervisionMode::none_style:
            b.content_null = true;
            b.style_input_id = sid;
            b.target_id = sid;
            break;
        case SupervisionMode::content_none:
            b.content_input_id = cid;
            b.style_null = true;
            b.target_id = cid;
            break;
    }
    return b;
}

Batch assemble_batch(const Corpus& corpus, const std::vector<BatchItem>& items, Tensor noise) {
    if (items.empty()) throw ArgumentError("empty batch");
    const Shape lat = slice_leading(corpus.content_latents, 0, 1).shape();
    const Shape pix = slice_leading(corpus.style_pixels, 0, 1).shape();
    const int S = corpus.style_stats.dim(1);
    Batch b;
    b.items = items;
    std::vector<Tensor> z0, cl, st, sp;
    for (std::size_t r = 0; r < items.size(); ++r) {
        const BatchItem& it = items[r];
        b.timesteps.push_back(it.timestep);
        b.content_null.push_back(it.content_null);
        b.style_null.push_back(it.style_null);
        const Tensor c = it.content_index >= 0 ? slice_leading(corpus.content_latents, it.content_index, 1) : Tensor();
        const Tensor s = it.style_index >= 0 ? slice_leading(corpus.style_latents, it.style_index, 1) : Tensor();
        switch (it.mode) {
            case SupervisionMode::content_style:
            case SupervisionMode::content_none:
                z0.push_back(c);
                cl.push_back(c);
                break;
            case SupervisionMode::style_style:
                z0.push_back(s);
                cl.push_back(s);
                break;
            case SupervisionMode::none_style:
                z0.push_back(s);
                cl.push_back(init::zeros(lat));
                break;
        }
        if (it.style_null) {
            st.push_back(init::zeros({1, S}));
            sp.push_back(init::zeros(pix));
        } else {
            st.push_back(slice_leading(corpus.style_stats, it.style_index, 1));
            sp.push_back(slice_leading(corpus.style_pixels, it.style_index, 1));
            b.styled_rows.push_back(static_cast<int>(r));
        }
    }
    b.z0 = concat_leading(z0);
    b.content_latents = concat_leading(cl);
    b.style_stats = concat_leading(st);
    b.style_pixels = concat_leading(sp);
    if (noise.shape() != b.z0.shape()) throw ArgumentError("noise shape does not match the batch latents");
    b.noise = std::move(noise);
    return b;
}

Batch draw_batch(const Corpus& corpus, const StageSettings& s, int T, Rng& rng) {
    const int nc = static_cast<int>(corpus.content.size());
    const int ns = static_cast<int>(corpus.style.size());
    std::vector<BatchItem> items;
    for (int r = 0; r < s.batch; ++r) {
        const SupervisionMode m = sample_supervision(rng, s.supervision);
        const int ci = rng.randint(0, nc - 1);
        const int si = rng.randint(0, ns - 1);
        const int t = rng.randint(0, T - 1);
        items.push_back(build_batch_item(m, corpus, ci, si, t));
    }
    Shape shape = slice_leading(corpus.content_latents, 0, 1).shape();
    shape[0] = s.batch;
    return assemble_batch(corpus, items, rng.normal_tensor(shape));
}

std::vector<std::string> report_columns() {
    return {"step", "total", "content", "style", "gan", "patch_gan", "disc", "patch_disc", "hg_noise", "hg_image",
            "local"};
}

std::vector<double> report_values(const StepReport& r) {
    return {static_cast<double>(r.step), r.total, r.content, r.style, r.gan, r.patch_gan, r.disc, r.patch_disc,
            r.hg_noise, r.hg_image, r.local};
}

// ---------------------------------------------------------------- trainer state

namespace {

AdamConfig adam_config(const StageSettings& s) {
    AdamConfig a;
    a.lr = s.lr;
    a.clip_norm = s.clip_norm;
    return a;
}

std::vector<std::pair<std::string, Var>> join(std::vector<std::pair<std::string, Var>> a,
                                              const std::vector<std::pair<std::string, Var>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void save_state(const fs::path& dir, const std::string& stage, long step, const PipelineConfig& cfg,
                const std::vector<std::pair<std::string, const Adam*>>& opts) {
    std::map<std::string, Tensor> tensors;
    for (const auto& [tag, opt] : opts)
        for (auto& [name, t] : opt->state()) tensors[tag + "/" + name] = t;
    CheckpointInfo info;
    info.module = "trainer-state";
    info.config = cfg;
    info.step = step;
    info.extra = {{"stage", stage}};
    save_checkpoint(dir, info, tensors);
}

long load_state(const fs::path& dir, const std::string& stage, const std::vector<std::pair<std::string, Adam*>>& opts) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "trainer-state" || ck.info.extra.value("stage", "") != stage)
        throw FormatError(dir.string() + " is not a " + stage + " trainer state");
    for (const auto& [tag, opt] : opts) {
        std::map<std::string, Tensor> mine;
        const std::string p = tag + "/";
        for (auto& [name, t] : ck.tensors)
            if (name.compare(0, p.size(), p) == 0) mine[name.substr(p.size())] = t;
        opt->load_state(mine);
    }
    return ck.info.step;
}

Var embedding(const Conditioner& c, const std::vector<int>& t, const Tensor& stats, const std::vector<bool>& snull) {
    return ops::add(c.time_embedding(t), c.embed_style(Var(stats), snull));
}

void count_modes(StepReport& r, const Batch& b) {
    for (const BatchItem& it : b.items) ++r.modes[static_cast<int>(it.mode)];
}

}  // namespace

// ---------------------------------------------------------------- stage 1

ImageTrainer::ImageTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model, const Corpus& corpus)
    : cfg_(cfg),
      frozen_((freeze(frozen), frozen)),
      model_(model),
      corpus_(corpus),
      schedule_(cfg.schedule()),
      gen_opt_((model.set_trainable(true), join(model.cond.params().trainable(), model.unet.params().trainable())),
               adam_config(cfg.stage.image)),
      disc_opt_(model.disc.params().trainable(), adam_config(cfg.stage.image)) {
    if (model.unet.temporal()) throw ArgumentError("stage 1 trains an image backbone");
}

StepReport ImageTrainer::step() {
    const StageSettings& s = cfg_.stage.image;
    Rng rng(derive_seed(s.seed, "image-step", static_cast<std::uint64_t>(step_)));
    const Batch b = draw_batch(corpus_, s, schedule_.T, rng);
    StepReport rep;
    rep.step = step_;
    count_modes(rep, b);

    Var z_t = q_sample(schedule_, Var(b.z0), b.timesteps, Var(b.noise));
    Var fc = model_.cond.encode_content(Var(b.content_latents), b.timesteps, b.content_null);
    Var emb = embedding(model_.cond, b.timesteps, b.style_stats, b.style_null);
    Var eps_hat = model_.unet.predict(z_t, fc, emb);
    Var lc = content_loss(Var(b.noise), eps_hat, cfg_.losses);
    Var total = lc;
    rep.content = lc.value()[0];

    Var out, sty;
    CropPlan crops;
    const bool styled = !b.styled_rows.empty();
    if (styled) {
        std::vector<int> tr;
        for (int r : b.styled_rows) tr.push_back(b.timesteps[r]);
        Var x0 = predict_x0(schedule_, ops::gather_leading(z_t, b.styled_rows),
                            ops::gather_leading(eps_hat, b.styled_rows), tr);
        out = frozen_.codec.decode_images(x0);
        sty = Var(gather_rows(b.style_pixels, b.styled_rows));
        Var ls = style_loss(out, sty, frozen_.features, cfg_.losses);
        crops = plan_crops(static_cast<int>(b.styled_rows.size()), out.shape()[2], out.shape()[3],
                           cfg_.discriminator.reference_crops, rng);
        GanTerms g = generator_gan_terms(out, sty, model_.disc, crops, cfg_.losses);
        rep.style = ls.value()[0];
        rep.gan = g.g_loss.value()[0];
        rep.patch_gan = g.patch_g.value()[0];
        total = ops::add(ops::add(total, ls), ops::add(g.g_loss, g.patch_g));
    }
    rep.total = total.value()[0];
    if (!std::isfinite(rep.total)) throw NumericError("stage 1: non-finite loss at step " + std::to_string(step_));
    ag::backward(total);
    gen_opt_.step();
    // The generator pass also reached the discriminators; their update uses
    // only the discriminator objective.
    model_.disc.params().zero_grad();
    if (styled) {
        GanTerms d = discriminator_gan_terms(out, sty, model_.disc, crops);
        rep.disc = d.d_loss.value()[0];
        rep.patch_disc = d.patch_d.value()[0];
        ag::backward(ops::add(d.d_loss, d.patch_d));
        disc_opt_.step();
    }
    ++step_;
    return rep;
}

void ImageTrainer::save(const fs::path& dir) const {
    model_.save(dir, step_);
    save_state(dir / "state", "image", step_, cfg_, {{"gen", &gen_opt_}, {"disc", &disc_opt_}});
}

void ImageTrainer::resume(const fs::path& dir) {
    ImageModel m = ImageModel::load(dir);
    model_.cond.params().load(m.cond.params().snapshot());
    model_.unet.params().load(m.unet.params().snapshot());
    model_.disc.params().load(m.disc.params().snapshot());
    step_ = load_state(dir / "state", "image", {{"gen", &gen_opt_}, {"disc", &disc_opt_}});
}

// ---------------------------------------------------------------- stage 2

AdapterTrainer::AdapterTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model,
                               StyleAdapter& adapter, const Corpus& corpus)
    : cfg_(cfg),
      frozen_((freeze(frozen), frozen)),
      model_(model),
      adapter_(adapter),
      corpus_(corpus),
      schedule_(cfg.schedule()),
      opt_((model.set_trainable(false), adapter.params().set_trainable(true), adapter.params().trainable()),
           adam_config(cfg.stage.adapter)) {
    std::vector<Tensor> maps;
    for (const Image& img : corpus.content) maps.push_back(annotate(img, adapter.kind()).map);
    maps_ = stack(maps);
}

StepReport AdapterTrainer::step() {
    StageSettings s = cfg_.stage.adapter;
    s.supervision.p = {1.0, 0.0, 0.0, 0.0};
    Rng rng(derive_seed(s.seed, "adapter-step", static_cast<std::uint64_t>(step_)));
    const Batch b = draw_batch(corpus_, s, schedule_.T, rng);
    StepReport rep;
    rep.step = step_;
    count_modes(rep, b);

    std::vector<int> ci;
    for (const BatchItem& it : b.items) ci.push_back(it.content_index);
    AdapterPyramid pyr = adapter_.forward(Var(gather_rows(maps_, ci)));
    Var z_t = q_sample(schedule_, Var(b.z0), b.timesteps, Var(b.noise));
    Var fc = model_.cond.encode_content(Var(b.content_latents), b.timesteps, b.content_null);
    Var emb = embedding(model_.cond, b.timesteps, b.style_stats, b.style_null);
    Var eps_hat = model_.unet.predict(z_t, fc, emb, pyr);
    Var lc = content_loss(Var(b.noise), eps_hat, cfg_.losses);
    rep.content = rep.total = lc.value()[0];
    if (!std::isfinite(rep.total)) throw NumericError("stage 2: non-finite loss at step " + std::to_string(step_));
    ag::backward(lc);
    opt_.step();
    ++step_;
    return rep;
}

void AdapterTrainer::save(const fs::path& dir) const {
    adapter_.save(dir / "adapter", step_);
    save_state(dir / "state", "adapter", step_, cfg_, {{"adapter", &opt_}});
}

void AdapterTrainer::resume(const fs::path& dir) {
    adapter_.params().load(StyleAdapter::load(dir / "adapter").params().snapshot());
    step_ = load_state(dir / "state", "adapter", {{"adapter", &opt_}});
}

// ---------------------------------------------------------------- stage 3

TemporalTrainer::TemporalTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model,
                                 Backbone& video, const VideoCorpus& clips, const Corpus& styles)
    : cfg_(cfg),
      frozen_((freeze(frozen), frozen)),
      model_(model),
      video_(video),
      clips_(clips),
      styles_(styles),
      schedule_(cfg.schedule()),
      opt_((model.set_trainable(false), video.params().trainable()), adam_config(cfg.stage.temporal)) {
    if (!video.temporal()) throw StateError("stage 3 needs an inflated video backbone");
    if (model.unet.temporal()) throw StateError("stage 3 needs the image backbone as the per-frame baseline");
    if (clips.frames < cfg.stage.temporal.frames)
        throw ConfigError("video clips have fewer frames than stage.temporal.frames");
    for (const auto& [name, v] : video.params().trainable())
        if (name.rfind("unet/temporal/", 0) != 0) throw StateError("spatial parameter " + name + " is trainable");
}

StepReport TemporalTrainer::step() {
    const StageSettings& s = cfg_.stage.temporal;
    const int N = s.frames;
    Rng rng(derive_seed(s.seed, "temporal-step", static_cast<std::uint64_t>(step_)));
    const int nclips = static_cast<int>(clips_.clips.size());
    const int nstyles = static_cast<int>(styles_.style.size());

    std::vector<int> rows, style_rows, t;
    for (int c = 0; c < s.batch; ++c) {
        const int clip = rng.randint(0, nclips - 1);
        const int start = rng.randint(0, clips_.frames - N);
        const int style = rng.randint(0, nstyles - 1);
        const int tc = rng.randint(0, schedule_.T - 1);  // shared by the clip's frames
        for (int i = 0; i < N; ++i) {
            rows.push_back(clip * clips_.frames + start + i);
            style_rows.push_back(style);
            t.push_back(tc);
        }
    }
    const Tensor z0 = gather_rows(clips_.latents, rows);
    const Tensor content = gather_rows(clips_.pixels, rows);
    const Tensor noise = rng.normal_tensor(z0.shape());
    const PatchLayout layout =
        make_patch_layout(content.dim(2), content.dim(3), PatchGeometry{}, rng.next_u64());

    StepReport rep;
    rep.step = step_;
    rep.modes[0] = s.batch;
    Var z_t = q_sample(schedule_, Var(z0), t, Var(noise));
    Var fc, emb;
    Tensor eps_image;
    {
        ag::NoGradGuard ng;
        fc = model_.cond.encode_content(Var(z0), t);
        emb = embedding(model_.cond, t, gather_rows(styles_.style_stats, style_rows), {});
        eps_image = model_.unet.predict(z_t, fc, emb).value();
    }
    Var eps_hat = video_.predict_video(z_t, fc, emb, N);
    Var out = frozen_.codec.decode_images(predict_x0(schedule_, z_t, eps_hat, t));
    HarmoniousTerms h = harmonious_loss(eps_hat, noise, eps_image, out, content, frozen_.features, layout,
                                        PatchGeometry{}, cfg_.losses);
    rep.hg_noise = h.global_noise.value()[0];
    rep.hg_image = h.global_image.value()[0];
    rep.local = h.local.value()[0];
    rep.total = h.total.value()[0];
    if (!std::isfinite(rep.total)) throw NumericError("stage 3: non-finite loss at step " + std::to_string(step_));
    ag::backward(h.total);
    opt_.step();
    ++step_;
    return rep;
}

void TemporalTrainer::save(const fs::path& dir) const {
    video_.save(dir / "unet", step_);
    save_state(dir / "state", "temporal", step_, cfg_, {{"temporal", &opt_}});
}

void TemporalTrainer::resume(const fs::path& dir) {
    video_.params().load(Backbone::load(dir / "unet").params().snapshot());
    step_ = load_state(dir / "state", "temporal", {{"temporal", &opt_}});
}

}  // namespace hicast
