// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "hicast/stylize.hpp"
#include "pipeline_fixture.hpp"

using namespace hicast;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result hicast_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hicast");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    return {rc, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = slurp(e.path());
    return m;
}

int csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = -1;  // header
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

struct Workspace {
    fs::path root = fs::temp_directory_path() / "hicast_test_cli";
    fs::path config = root / "tiny.json";
    fs::path run = root / "run";
    fs::path data = root / "data";

    Workspace() {
        fs::remove_all(root);
        fs::create_directories(root);
        PipelineConfig c = testing::tiny_config();
        c.stage.image.steps = 4;
        c.stage.image.log_every = 2;
        c.stage.image.checkpoint_every = 2;
        c.stage.adapter.steps = 2;
        c.stage.temporal.steps = 2;
        std::ofstream(config) << nlohmann::json(c).dump(2);
    }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

void train_all() {
    static bool done = false;
    if (done) return;
    done = true;
    for (const char* st : {"codec", "features", "image", "adapter:edge", "temporal"})
        REQUIRE(hicast_cli({"train", "--stage", st, "--config", ws().config.string(), "--out", ws().run.string()}).code == 0);
    REQUIRE(hicast_cli({"gen-data", "--out", ws().data.string(), "--images", "2", "--videos", "1", "--frames", "3"}).code == 0);
}

std::vector<std::string> sample_args(const fs::path& out) {
    return {"--content", (ws().data / "images/content_0000.png").string(),
            "--style", (ws().data / "styles/style_0001.png").string(),
            "--ckpt", ws().run.string(), "--out", out.string(), "--steps", "3", "--seed", "5"};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(hicast_cli({}).code == 2);
    CHECK(hicast_cli({"frobnicate"}).code == 2);
    CHECK(hicast_cli({"train", "--stage", "image"}).code == 2);
    CHECK(hicast_cli({"--help"}).code == 0);
    const Result r = hicast_cli({"train", "--stage", "warp", "--out", (ws().root / "x").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown stage") != std::string::npos);
}

TEST_CASE("gen-data is reproducible and refuses to overwrite") {
    const fs::path a = ws().root / "gen_a", b = ws().root / "gen_b";
    std::vector<std::string> args{"--images", "3", "--videos", "2", "--frames", "3", "--size", "32", "--seed", "4"};
    auto with_out = [&](const fs::path& o) {
        std::vector<std::string> v{"gen-data", "--out", o.string()};
        v.insert(v.end(), args.begin(), args.end());
        return v;
    };
    CHECK(hicast_cli(with_out(a)).code == 0);
    CHECK(hicast_cli(with_out(b)).code == 0);
    const auto ta = tree(a), tb = tree(b);
    CHECK(ta.size() == 1 + 3 + 3 + 2 * (3 + 2 + 2));
    CHECK(ta == tb);
    CHECK(hicast_cli(with_out(a)).code == 2);
    auto forced = with_out(a);
    forced.push_back("--force");
    CHECK(hicast_cli(forced).code == 0);
    CHECK(tree(a) == tb);

    const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(m["schema"] == cli::kCorpusSchema);
    CHECK(m["styles"].size() == 3);
    CHECK(m["styles"][0].contains("family"));
    const auto clips = load_video_folder(a / "videos").items;
    CHECK(clips.size() == 2);
    CHECK(clips[0].has_flow());
}

TEST_CASE("missing stage dependencies exit 3 naming the artifact") {
    const fs::path empty = ws().root / "empty_run";
    const Result r = hicast_cli({"train", "--stage", "adapter:edge", "--config", ws().config.string(), "--out", empty.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("codec") != std::string::npos);
    train_all();
    const fs::path partial = ws().root / "partial_run";
    fs::create_directories(partial);
    fs::copy(ws().run / "codec", partial / "codec", fs::copy_options::recursive);
    fs::copy(ws().run / "features", partial / "features", fs::copy_options::recursive);
    const Result r2 = hicast_cli({"train", "--stage", "adapter:depth", "--config", ws().config.string(), "--out", partial.string()});
    CHECK(r2.code == 3);
    CHECK(r2.err.find("image") != std::string::npos);
}

TEST_CASE("training writes logs and resumes with continued step numbering") {
    train_all();
    const fs::path log = ws().run / "image" / "loss.csv";
    CHECK(csv_rows(log) == 3);  // steps 0, 2 and the final step 3
    CHECK(nlohmann::json::parse(slurp(ws().run / "image" / "state" / "manifest.json"))["config"].is_object());

    const fs::path run2 = ws().root / "run_resume";
    fs::copy(ws().run, run2, fs::copy_options::recursive);
    const Result r = hicast_cli({"train", "--stage", "image", "--config", ws().config.string(), "--out", run2.string(),
                                 "--steps", "6", "--resume", (run2 / "image").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("step 4 ") != std::string::npos);
    CHECK(r.out.find("step 0 ") == std::string::npos);
    CHECK(csv_rows(run2 / "image" / "loss.csv") == 5);  // 0, 2, 3, 4, 5
}

TEST_CASE("sample: weights, adapters, sidecar") {
    train_all();
    const fs::path out = ws().root / "s" / "a.png";
    CHECK(hicast_cli([&] { auto v = sample_args(out); v.insert(v.begin(), "sample"); return v; }()).code == 0);
    const auto side = nlohmann::json::parse(slurp(ws().root / "s" / "a.json"));
    CHECK(side["schema"] == cli::kRunSchema);
    CHECK(side["settings"]["weights"]["wo"] == 1.0);
    CHECK(side["settings"]["sampler"]["steps"] == 3);

    auto with = [&](const fs::path& o, std::vector<std::string> extra) {
        auto v = sample_args(o);
        v.insert(v.begin(), "sample");
        v.insert(v.end(), extra.begin(), extra.end());
        return hicast_cli(v);
    };
    CHECK(with(ws().root / "s" / "b.png", {"--wo", "0.6", "--wc", "0.2", "--ws", "0.2"}).code == 0);
    const Result bad = with(ws().root / "s" / "c.png", {"--wo", "0.5", "--wc", "0.2", "--ws", "0.2"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("wo + wc + ws = 1") != std::string::npos);
    CHECK(with(ws().root / "s" / "d.png", {"--adapter", "sketch:1"}).code == 2);
    CHECK(with(ws().root / "s" / "e.png", {"--adapter", "edge:x"}).code == 2);
    CHECK(with(ws().root / "s" / "f.png", {"--adapter", "depth:1"}).code == 3);
    CHECK(with(ws().root / "s" / "g.png", {"--adapter", "edge:0.7"}).code == 0);

    // Same seed, same bytes.
    CHECK(with(ws().root / "s" / "a2.png", {}).code == 0);
    CHECK(slurp(ws().root / "s" / "a2.png") == slurp(out));
}

TEST_CASE("video sampling writes one PNG per frame") {
    train_all();
    for (const char* mode : {"video", "per-frame"}) {
        const fs::path out = ws().root / "v" / mode;
        std::vector<std::string> v{"sample", "--content-dir", (ws().data / "videos/clip_0000").string(),
                                   "--style", (ws().data / "styles/style_0000.png").string(),
                                   "--ckpt", ws().run.string(), "--out", out.string(), "--steps", "2"};
        if (std::string(mode) == "per-frame") v.push_back("--per-frame");
        CHECK(hicast_cli(v).code == 0);
        CHECK(load_image_folder(out).items.size() == 3);
        const auto side = nlohmann::json::parse(slurp(out / "run.json"));
        CHECK(side["model"] == (std::string(mode) == "video" ? "video" : "image-per-frame"));
    }
}

TEST_CASE("sweep grid: cells, determinism and the weight-0 adapter cell") {
    train_all();
    auto sweep = [&](const fs::path& out, std::vector<std::string> extra) {
        auto v = sample_args(out);
        v.insert(v.begin(), "sweep");
        v.insert(v.end(), extra.begin(), extra.end());
        return hicast_cli(v);
    };
    const fs::path a = ws().root / "sw_a", b = ws().root / "sw_b";
    CHECK(sweep(a, {"--axis", "adapter:edge", "--values", "0,0.5,1"}).code == 0);
    CHECK(sweep(b, {"--axis", "adapter:edge", "--values", "0,0.5,1"}).code == 0);
    CHECK(tree(a) == tree(b));
    const Tensor grid = read_png(a / "grid.png");
    CHECK(grid.dim(2) == 3 * 32 + 2 * 2);

    const fs::path plain = ws().root / "sw_plain.png";
    CHECK(hicast_cli([&] { auto v = sample_args(plain); v.insert(v.begin(), "sample"); return v; }()).code == 0);
    CHECK(max_abs_diff(read_png(a / "cell_0000.png"), read_png(plain)) < 1e-6);
    CHECK(max_abs_diff(read_png(a / "cell_0002.png"), read_png(plain)) > 0.0);

    const fs::path s = ws().root / "sw_scale";
    CHECK(sweep(s, {"--axis", "scaling", "--values", "1,0.6"}).code == 0);
    const auto side = nlohmann::json::parse(slurp(s / "sweep.json"));
    CHECK(side["cells"][1]["settings"]["weights"]["wc"].get<double>() == doctest::Approx(0.2));
    CHECK(max_abs_diff(read_png(s / "cell_0000.png"), read_png(plain)) == 0.0);
    CHECK(sweep(ws().root / "sw_bad", {"--axis", "zoom", "--values", "1"}).code == 2);
}

TEST_CASE("eval subcommand") {
    train_all();
    const fs::path clip = ws().data / "videos/clip_0000";
    const fs::path report = ws().root / "eval.json";
    const Result r = hicast_cli({"eval", "--pred", clip.string(), "--content-dir", clip.string(), "--style",
                                 (ws().data / "styles/style_0000.png").string(), "--ckpt", ws().run.string(),
                                 "--gaps", "1,2", "--out", report.string()});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["temporal"]["1"]["mean"].get<double>() >= 0.0);
    CHECK(j["gram_loss"]["items"].size() == 3);
    CHECK(hicast_cli({"eval", "--pred", clip.string(), "--ckpt", (ws().root / "nowhere").string()}).code == 3);
}
