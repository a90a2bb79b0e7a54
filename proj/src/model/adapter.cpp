// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/adapter.hpp"

#include <cmath>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"

namespace hicast {

void AdapterConfig::validate() const {
    if (factor < 1 || (factor & (factor - 1))) throw ConfigError("adapter factor must be a power of two");
    if (channels.empty()) throw ConfigError("adapter needs the backbone level channels");
    for (int c : channels)
        if (c < 1) throw ConfigError("adapter channel counts must be positive");
}

void to_json(nlohmann::json& j, const AdapterConfig& c) {
    j = {{"kind", to_string(c.kind)}, {"factor", c.factor}, {"channels", c.channels}};
}

void from_json(const nlohmann::json& j, AdapterConfig& c) {
    if (j.contains("kind")) c.kind = parse_control_kind(j.at("kind").get<std::string>());
    c.factor = j.value("factor", c.factor);
    c.channels = j.value("channels", c.channels);
}

StyleAdapter::StyleAdapter(AdapterConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), params_("adapter/" + to_string(cfg_.kind) + "/") {
    cfg_.validate();
    Rng rng(derive_seed(seed, "adapter-init"));
    const int in0 = cfg_.factor * cfg_.factor;
    for (std::size_t k = 0; k < cfg_.channels.size(); ++k) {
        const int c = cfg_.channels[k];
        const std::string p = "level" + std::to_string(k);
        Level l;
        l.in = nn::Conv2d(params_, p + ".in", k == 0 ? in0 : cfg_.channels[k - 1], c, 3, k == 0 ? 1 : 2, rng);
        l.res0 = nn::Conv2d(params_, p + ".res0", c, c, 3, 1, rng);
        l.res1 = nn::Conv2d(params_, p + ".res1", c, c, 3, 1, rng);
        l.proj = nn::Conv2d(params_, p + ".proj", c, c, 1, 1, rng, true);
        levels_.push_back(std::move(l));
    }
}

AdapterPyramid StyleAdapter::forward(const Var& maps) const {
    if (maps.shape().size() != 4 || maps.dim(1) != 1)
        throw ArgumentError("adapter expects control maps [B,1,H,W], got " + shape_str(maps.shape()));
    const int step = cfg_.factor << (levels_.size() - 1);
    if (maps.dim(2) % step || maps.dim(3) % step)
        throw ArgumentError("control map size " + std::to_string(maps.dim(2)) + "x" + std::to_string(maps.dim(3)) +
                            " not divisible by " + std::to_string(step));
    AdapterPyramid out;
    Var x = ops::pixel_unshuffle(maps, cfg_.factor);
    for (const Level& l : levels_) {
        x = l.in(x);
        x = ops::add(x, l.res1(ops::silu(l.res0(ops::silu(x)))));
        out.push_back(l.proj(x));
    }
    return out;
}

AdapterPyramid StyleAdapter::forward(const ControlMap& map) const {
    if (map.kind != cfg_.kind)
        throw ArgumentError("adapter trained on " + to_string(cfg_.kind) + " maps got a " + to_string(map.kind) +
                            " map");
    if (map.map.rank() != 3 || map.map.dim(0) != 1) throw ArgumentError("control map must be [1,H,W]");
    return forward(Var(map.map.reshaped({1, 1, map.map.dim(1), map.map.dim(2)})));
}

void StyleAdapter::save(const std::filesystem::path& dir, long step, const nlohmann::json& extra) const {
    CheckpointInfo info;
    info.module = "adapter";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    info.extra = extra.is_object() ? extra : nlohmann::json::object();
    info.extra["kind"] = to_string(cfg_.kind);
    save_checkpoint(dir, info, params_.snapshot());
}

StyleAdapter StyleAdapter::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "adapter") throw FormatError(dir.string() + " is not an adapter checkpoint");
    StyleAdapter a(ck.info.config.get<AdapterConfig>(), ck.info.seed);
    a.params_.load(ck.tensors);
    return a;
}

AdapterPyramid combine(const std::vector<std::pair<AdapterPyramid, double>>& pyramids) {
    if (pyramids.empty()) return {};
    const AdapterPyramid& first = pyramids.front().first;
    for (const auto& [p, w] : pyramids) {
        if (!std::isfinite(w)) throw ArgumentError("adapter weight must be finite");
        if (p.size() != first.size()) throw ArgumentError("adapter pyramids have different level counts");
        for (std::size_t k = 0; k < p.size(); ++k)
            if (p[k].shape() != first[k].shape())
                throw ArgumentError("adapter pyramid level " + std::to_string(k) + " shapes differ: " +
                                    shape_str(p[k].shape()) + " vs " + shape_str(first[k].shape()));
    }
    AdapterPyramid out;
    for (std::size_t k = 0; k < first.size(); ++k) {
        Var acc = ops::scale(pyramids[0].first[k], pyramids[0].second);
        for (std::size_t j = 1; j < pyramids.size(); ++j)
            acc = ops::add(acc, ops::scale(pyramids[j].first[k], pyramids[j].second));
        out.push_back(acc);
    }
    return out;
}

AdapterPyramid repeat_batch(const AdapterPyramid& p, int n) {
    AdapterPyramid out;
    for (const Var& level : p) {
        if (level.dim(0) != 1) throw ArgumentError("repeat_batch expects a batch-1 pyramid");
        out.push_back(ops::gather_leading(level, std::vector<int>(n, 0)));
    }
    return out;
}

}  // namespace hicast
