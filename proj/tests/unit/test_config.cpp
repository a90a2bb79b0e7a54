// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hicast/config.hpp"
#include "hicast/errors.hpp"

using namespace hicast;
namespace fs = std::filesystem;

TEST_CASE("defaults validate and survive a JSON round trip") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.stage.image.steps = 17;
    c.losses.lambda_s = 3.5;
    c.discriminator.reference_crops = 2;
    c.content_hidden = 24;
    c.adapters = {ControlKind::depth};
    c.diffusion.sampler.steps = 7;
    const nlohmann::json j = c;
    const PipelineConfig back = j.get<PipelineConfig>();
    CHECK(nlohmann::json(back) == j);
    CHECK(back.stage.image.steps == 17);
    CHECK(back.discriminator.reference_crops == 2);
    CHECK(back.content_hidden == 24);
    CHECK(back.adapters == std::vector<ControlKind>{ControlKind::depth});
}

TEST_CASE("partial documents keep defaults") {
    const auto c = nlohmann::json::parse(R"({"stage": {"image": {"steps": 5}}})").get<PipelineConfig>();
    CHECK(c.stage.image.steps == 5);
    CHECK(c.stage.image.batch == 8);
    CHECK(c.stage.image.supervision.p == std::array<double, 4>{0.7, 0.1, 0.1, 0.1});
    CHECK(c.stage.adapter.supervision.p[0] == 1.0);
    CHECK(c.losses.lambda_c == 2.0);
    CHECK(c.diffusion.sampler.steps == 20);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"model": {}})").get<PipelineConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"data": {"size": "big"}})").get<PipelineConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"adapters": {"kinds": ["blur"]}})").get<PipelineConfig>(), ArgumentError);

    PipelineConfig c;
    c.backbone.latent_channels = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.data.size = 36;  // not a multiple of factor * 2^(levels-1)
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.stage.image.supervision.p = {0.5, 0.5, 0.5, 0.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.stage.temporal.frames = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.diffusion.sampler.eta = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("load_config reads files") {
    const fs::path dir = fs::temp_directory_path() / "hicast_test_config";
    fs::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"data": {"size": 64}})";
        std::ofstream(dir / "bad.json") << "{ not json";
    }
    CHECK(load_config(dir / "ok.json").data.size == 64);
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
    fs::remove_all(dir);
}
