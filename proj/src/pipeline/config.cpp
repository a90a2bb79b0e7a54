// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "hicast/errors.hpp"

namespace hicast {

void SupervisionProbs::validate() const {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw ConfigError("supervision probabilities must be >= 0");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("supervision probabilities must sum to 1");
}

void StageSettings::validate(const char* name) const {
    const std::string n(name);
    if (steps < 0) throw ConfigError(n + ": steps must be >= 0");
    if (batch < 1) throw ConfigError(n + ": batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError(n + ": lr must be > 0");
    if (checkpoint_every < 1 || log_every < 1) throw ConfigError(n + ": checkpoint/log intervals must be >= 1");
    if (frames < 1) throw ConfigError(n + ": frames must be >= 1");
    supervision.validate();
}

StagesConfig::StagesConfig() {
    image.lr = 1e-3;  // from-scratch backbone; 1e-4 barely moves it in 2000 steps
    adapter.steps = 1000;
    adapter.supervision.p = {1.0, 0.0, 0.0, 0.0};
    temporal.steps = 1000;
    temporal.batch = 1;  // clips per step
    temporal.supervision.p = {1.0, 0.0, 0.0, 0.0};
}

void PipelineConfig::validate() const {
    if (data.size < 8 || data.content_images < 1 || data.style_images < 1 || data.frames < 1)
        throw ConfigError("data: invalid sizes");
    codec.model.validate();
    feature_net.model.validate();
    backbone.validate();
    losses.validate();
    if (backbone.latent_channels != codec.model.latent_channels)
        throw ConfigError("backbone.latent_channels must equal codec.latent_channels");
    const int step = codec.model.factor << (backbone.levels() - 1);
    if (data.size % step) throw ConfigError("data.size must be divisible by " + std::to_string(step));
    if (stage.temporal.frames > backbone.max_frames) throw ConfigError("stage.temporal.frames exceeds max_frames");
    if (content_hidden < 1) throw ConfigError("content_hidden must be positive");
    diffusion.sampler.validate(diffusion.T);
    make_schedule(diffusion.T, diffusion.beta_start, diffusion.beta_end);
    stage.image.validate("stage.image");
    stage.adapter.validate("stage.adapter");
    stage.temporal.validate("stage.temporal");
}

ConditioningConfig PipelineConfig::conditioning() const {
    ConditioningConfig c;
    c.latent_channels = codec.model.latent_channels;
    c.content_channels = backbone.content_channels;
    c.d_emb = backbone.d_emb;
    c.stats_dim = feature_net.model.stats_dim();
    c.content_hidden = content_hidden;
    c.timesteps = diffusion.T;
    return c;
}

AdapterConfig PipelineConfig::adapter(ControlKind kind) const {
    AdapterConfig a;
    a.kind = kind;
    a.factor = codec.model.factor;
    a.channels = backbone.channels;
    return a;
}

NoiseSchedule PipelineConfig::schedule() const {
    return make_schedule(diffusion.T, diffusion.beta_start, diffusion.beta_end);
}

namespace {

nlohmann::json stage_json(const StageSettings& s) {
    return {{"steps", s.steps},
            {"batch", s.batch},
            {"lr", s.lr},
            {"seed", s.seed},
            {"clip_norm", s.clip_norm},
            {"checkpoint_every", s.checkpoint_every},
            {"log_every", s.log_every},
            {"supervision", s.supervision.p},
            {"frames", s.frames}};
}

void stage_from(const nlohmann::json& j, StageSettings& s) {
    s.steps = j.value("steps", s.steps);
    s.batch = j.value("batch", s.batch);
    s.lr = j.value("lr", s.lr);
    s.seed = j.value("seed", s.seed);
    s.clip_norm = j.value("clip_norm", s.clip_norm);
    s.checkpoint_every = j.value("checkpoint_every", s.checkpoint_every);
    s.log_every = j.value("log_every", s.log_every);
    s.supervision.p = j.value("supervision", s.supervision.p);
    s.frames = j.value("frames", s.frames);
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineConfig& c) {
    std::vector<std::string> kinds;
    for (ControlKind k : c.adapters) kinds.push_back(to_string(k));
    const auto& ct = c.codec.train;
    const auto& ft = c.feature_net.train;
    j = {{"data",
          {{"seed", c.data.seed},
           {"size", c.data.size},
           {"content_images", c.data.content_images},
           {"style_images", c.data.style_images},
           {"videos", c.data.videos},
           {"frames", c.data.frames},
           {"validation_images", c.data.validation_images},
           {"dir", c.data.dir.string()}}},
         {"codec",
          {{"model", c.codec.model},
           {"train",
            {{"steps", ct.steps}, {"batch", ct.batch}, {"lr", ct.lr}, {"seed", ct.seed}, {"latent_reg", ct.latent_reg}}}}},
         {"feature_net",
          {{"model", c.feature_net.model},
           {"train", {{"steps", ft.steps}, {"batch", ft.batch}, {"lr", ft.lr}, {"seed", ft.seed}}}}},
         {"backbone", c.backbone},
         {"adapters", {{"kinds", kinds}}},
         {"diffusion",
          {{"T", c.diffusion.T},
           {"beta_start", c.diffusion.beta_start},
           {"beta_end", c.diffusion.beta_end},
           {"sampler", c.diffusion.sampler}}},
         {"losses", c.losses},
         {"stage",
          {{"image", stage_json(c.stage.image)},
           {"adapter", stage_json(c.stage.adapter)},
           {"temporal", stage_json(c.stage.temporal)}}}};
    j["backbone"]["content_hidden"] = c.content_hidden;
    j["losses"]["discriminator"] = c.discriminator;
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
    static const std::set<std::string> sections{"data",     "codec",     "feature_net", "backbone",
                                                "adapters", "diffusion", "losses",      "stage"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!sections.count(key)) throw ConfigError("unknown config section '" + key + "'");
    try {
        if (j.contains("data")) {
            const auto& d = j["data"];
            c.data.seed = d.value("seed", c.data.seed);
            c.data.size = d.value("size", c.data.size);
            c.data.content_images = d.value("content_images", c.data.content_images);
            c.data.style_images = d.value("style_images", c.data.style_images);
            c.data.videos = d.value("videos", c.data.videos);
            c.data.frames = d.value("frames", c.data.frames);
            c.data.validation_images = d.value("validation_images", c.data.validation_images);
            c.data.dir = d.value("dir", c.data.dir.string());
        }
        if (j.contains("codec")) {
            const auto& s = j["codec"];
            if (s.contains("model")) c.codec.model = s["model"].get<CodecConfig>();
            if (s.contains("train")) {
                auto& t = c.codec.train;
                const auto& v = s["train"];
                t.steps = v.value("steps", t.steps);
                t.batch = v.value("batch", t.batch);
                t.lr = v.value("lr", t.lr);
                t.seed = v.value("seed", t.seed);
                t.latent_reg = v.value("latent_reg", t.latent_reg);
            }
        }
        if (j.contains("feature_net")) {
            const auto& s = j["feature_net"];
            if (s.contains("model")) c.feature_net.model = s["model"].get<FeatureNetConfig>();
            if (s.contains("train")) {
                auto& t = c.feature_net.train;
                const auto& v = s["train"];
                t.steps = v.value("steps", t.steps);
                t.batch = v.value("batch", t.batch);
                t.lr = v.value("lr", t.lr);
                t.seed = v.value("seed", t.seed);
            }
        }
        if (j.contains("backbone")) {
            c.backbone = j["backbone"].get<BackboneConfig>();
            c.content_hidden = j["backbone"].value("content_hidden", c.content_hidden);
        }
        if (j.contains("adapters") && j["adapters"].contains("kinds")) {
            c.adapters.clear();
            for (const auto& k : j["adapters"]["kinds"]) c.adapters.push_back(parse_control_kind(k.get<std::string>()));
        }
        if (j.contains("diffusion")) {
            const auto& d = j["diffusion"];
            c.diffusion.T = d.value("T", c.diffusion.T);
            c.diffusion.beta_start = d.value("beta_start", c.diffusion.beta_start);
            c.diffusion.beta_end = d.value("beta_end", c.diffusion.beta_end);
            if (d.contains("sampler")) c.diffusion.sampler = d["sampler"].get<SamplerConfig>();
        }
        if (j.contains("losses")) {
            c.losses = j["losses"].get<LossWeights>();
            if (j["losses"].contains("discriminator"))
                c.discriminator = j["losses"]["discriminator"].get<DiscriminatorConfig>();
        }
        if (j.contains("stage")) {
            const auto& s = j["stage"];
            if (s.contains("image")) stage_from(s["image"], c.stage.image);
            if (s.contains("adapter")) stage_from(s["adapter"], c.stage.adapter);
            if (s.contains("temporal")) stage_from(s["temporal"], c.stage.temporal);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    PipelineConfig c = j.get<PipelineConfig>();
    c.validate();
    return c;
}

}  // namespace hicast
