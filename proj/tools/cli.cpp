// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"
#include "hicast/metrics.hpp"
#include "hicast/stylize.hpp"

namespace hicast::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- run dir

PipelineConfig RunDir::load_config() const {
    if (fs::exists(config())) return hicast::load_config(config());
    return PipelineConfig{};
}

FrozenModels RunDir::load_frozen() const {
    if (!checkpoint_exists(codec())) throw StateError("missing dependency: codec checkpoint " + codec().string());
    if (!checkpoint_exists(features()))
        throw StateError("missing dependency: feature-net checkpoint " + features().string());
    FrozenModels f{Codec::load(codec()), FeatureNet::load(features())};
    f.codec.params().set_trainable(false);
    f.features.params().set_trainable(false);
    return f;
}

ImageModel RunDir::load_image() const {
    for (const char* part : {"cond", "unet", "disc"})
        if (!checkpoint_exists(image() / part))
            throw StateError("missing dependency: image-stage checkpoint " + (image() / part).string());
    ImageModel m = ImageModel::load(image());
    m.set_trainable(false);
    return m;
}

namespace {

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream o(path);
    if (!o) throw IoError("cannot write " + path.string());
    o << j.dump(2) << "\n";
}

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d", i);
    return buf;
}

std::string numbered(const char* stem, int i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d", stem, i);
    return buf;
}

Tensor batch1(const Tensor& chw) { return chw.reshaped({1, chw.dim(0), chw.dim(1), chw.dim(2)}); }

Tensor item(const Tensor& nchw, int i) {
    return slice_leading(nchw, i, 1).reshaped({nchw.dim(1), nchw.dim(2), nchw.dim(3)});
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    fs::path out;
    int images = 16;
    int videos = 4;
    int frames = 8;
    int size = 32;
    std::uint64_t seed = 0;
    bool force = false;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
    if (a.images < 1 || a.videos < 0 || a.frames < 2 || a.size < 8)
        throw ArgumentError("gen-data needs --images >= 1, --videos >= 0, --frames >= 2, --size >= 8");
    if (fs::exists(a.out) && !fs::is_empty(a.out)) {
        if (!a.force) throw ArgumentError("output directory " + a.out.string() + " is not empty (use --force)");
        fs::remove_all(a.out);
    }
    fs::create_directories(a.out / "images");
    fs::create_directories(a.out / "styles");
    json manifest = {{"schema", kCorpusSchema}, {"seed", a.seed}, {"size", a.size}, {"frames", a.frames}};

    const ImageDataset content = make_content_corpus(derive_seed(a.seed, "content"), a.images, a.size);
    json images = json::array();
    for (int i = 0; i < a.images; ++i) {
        const std::string file = "images/" + numbered("content", i) + ".png";
        write_png(a.out / file, content.items[i].pixels);
        images.push_back({{"file", file}, {"source", content.items[i].id}});
    }
    const ImageDataset styles = make_style_corpus(derive_seed(a.seed, "style"), a.images, a.size);
    json style_list = json::array();
    for (int i = 0; i < a.images; ++i) {
        const Image& s = styles.items[i];
        const std::string file = "styles/" + numbered("style", i) + ".png";
        write_png(a.out / file, s.pixels);
        style_list.push_back({{"file", file},
                              {"source", s.id},
                              {"family", *s.style_family},
                              {"family_name", to_string(static_cast<StyleFamily>(*s.style_family))}});
    }
    json videos = json::array();
    if (a.videos > 0) {
        const VideoDataset clips = make_video_corpus(derive_seed(a.seed, "video"), a.videos, a.frames, a.size);
        for (int v = 0; v < a.videos; ++v) {
            const VideoClip& c = clips.items[v];
            const std::string dir = "videos/" + numbered("clip", v);
            fs::create_directories(a.out / dir);
            for (int k = 0; k < c.frame_count(); ++k) write_png(a.out / dir / (frame_name(k) + ".png"), item(c.frames, k));
            for (int k = 0; k + 1 < c.frame_count(); ++k) {
                write_flow(a.out / dir / (numbered("flow", k) + ".hcfl"), item(*c.flows, k));
                write_occlusion(a.out / dir / (numbered("occlusion", k) + ".hcoc"),
                                slice_leading(*c.occlusion, k, 1).reshaped({a.size, a.size}));
            }
            videos.push_back({{"dir", dir}, {"source", c.id}, {"frames", c.frame_count()}});
        }
    }
    manifest["images"] = images;
    manifest["styles"] = style_list;
    manifest["videos"] = videos;
    write_json(a.out / "manifest.json", manifest);
    out << "wrote " << a.images << " content, " << a.images << " style images and " << a.videos << " clips to "
        << a.out.string() << "\n";
    return ok;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string stage;
    fs::path config;
    fs::path out;
    fs::path resume;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
};

class LossLog {
public:
    /// Keeps rows with step < first_step when appending after a resume.
    LossLog(const fs::path& path, long first_step) {
        std::vector<std::string> keep;
        if (first_step > 0 && fs::exists(path)) {
            std::ifstream in(path);
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line))
                if (!line.empty() && std::stol(line.substr(0, line.find(','))) < first_step) keep.push_back(line);
        }
        o_.open(path, std::ios::trunc);
        if (!o_) throw IoError("cannot write " + path.string());
        const auto cols = report_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) o_ << (i ? "," : "") << cols[i];
        o_ << "\n";
        for (const auto& l : keep) o_ << l << "\n";
    }

    void write(const StepReport& r) {
        const auto v = report_values(r);
        o_ << r.step;
        char buf[40];
        for (std::size_t i = 1; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.9g", v[i]);
            o_ << buf;
        }
        o_ << "\n";
        o_.flush();
    }

private:
    std::ofstream o_;
};

void write_simple_log(const fs::path& path, const std::vector<double>& losses, int every) {
    std::ofstream o(path);
    if (!o) throw IoError("cannot write " + path.string());
    o << "step,loss\n";
    char buf[48];
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (i % every == 0 || i + 1 == losses.size()) {
            std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, losses[i]);
            o << buf;
        }
}

template <class Trainer>
void train_loop(Trainer& tr, const StageSettings& s, const fs::path& dir, std::ostream& out) {
    LossLog log(dir / "loss.csv", tr.steps_done());
    while (tr.steps_done() < s.steps) {
        const StepReport r = tr.step();
        const long done = tr.steps_done();
        if (r.step % s.log_every == 0 || done == s.steps) {
            log.write(r);
            out << "step " << r.step << " loss " << r.total << "\n";
        }
        if (done % s.checkpoint_every == 0 && done < s.steps) tr.save(dir);
    }
    tr.save(dir);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
    RunDir run{a.out};
    const std::string st = a.stage;
    StageSettings* settings = nullptr;
    std::optional<ControlKind> kind;
    if (st == "image") settings = &cfg.stage.image;
    else if (st == "temporal") settings = &cfg.stage.temporal;
    else if (st.rfind("adapter:", 0) == 0) {
        kind = parse_control_kind(st.substr(8));
        settings = &cfg.stage.adapter;
    } else if (st != "codec" && st != "features") {
        throw ArgumentError("unknown stage '" + st + "' (expected codec, features, image, adapter:KIND or temporal)");
    }
    if (a.steps) {
        if (settings) settings->steps = *a.steps;
        else if (st == "codec") cfg.codec.train.steps = *a.steps;
        else cfg.feature_net.train.steps = *a.steps;
    }
    if (a.seed) {
        if (settings) settings->seed = *a.seed;
        else if (st == "codec") cfg.codec.train.seed = *a.seed;
        else cfg.feature_net.train.seed = *a.seed;
    }
    cfg.validate();
    if (!a.resume.empty() && !settings) throw ArgumentError("--resume applies to the image, adapter and temporal stages");
    fs::create_directories(run.root);

    const TrainingData data = load_training_data(cfg.data);
    if (st == "codec") {
        CodecTrainReport rep;
        Codec codec = train_stage0_codec(cfg, data, &rep);
        codec.save(run.codec(), cfg.codec.train.steps);
        const double p_c = psnr(codec.decode_tensor(codec.encode_tensor(stack_pixels(data.content_validation))),
                                stack_pixels(data.content_validation));
        const double p_s = psnr(codec.decode_tensor(codec.encode_tensor(stack_pixels(data.style_validation))),
                                stack_pixels(data.style_validation));
        write_simple_log(run.codec() / "loss.csv", rep.losses, cfg.stage.image.log_every);
        write_json(run.codec() / "summary.json", {{"psnr_content", p_c}, {"psnr_style", p_s}});
        out << "codec trained: validation PSNR content " << p_c << " dB, style " << p_s << " dB\n";
    } else if (st == "features") {
        FeatureTrainReport rep;
        FeatureNet net = train_stage0_features(cfg, data, &rep);
        net.save(run.features(), cfg.feature_net.train.steps);
        write_simple_log(run.features() / "loss.csv", rep.losses, cfg.stage.image.log_every);
        write_json(run.features() / "summary.json", {{"accuracy", rep.accuracy}});
        out << "feature net trained: validation accuracy " << rep.accuracy << "\n";
    } else {
        FrozenModels frozen = run.load_frozen();
        const Corpus corpus = prepare_corpus(data.content, data.style, frozen);
        if (st == "image") {
            ImageModel model(cfg, cfg.stage.image.seed);
            ImageTrainer tr(cfg, frozen, model, corpus);
            if (!a.resume.empty()) tr.resume(a.resume);
            write_json(run.image() / "config.json", cfg);
            train_loop(tr, *settings, run.image(), out);
        } else if (kind) {
            ImageModel model = run.load_image();
            StyleAdapter adapter(cfg.adapter(*kind), derive_seed(settings->seed, to_string(*kind)));
            AdapterTrainer tr(cfg, frozen, model, adapter, corpus);
            if (!a.resume.empty()) tr.resume(a.resume);
            write_json(run.adapter(*kind) / "config.json", cfg);
            train_loop(tr, *settings, run.adapter(*kind), out);
        } else {
            ImageModel model = run.load_image();
            if (data.videos.empty()) throw ArgumentError("temporal stage needs training videos");
            Backbone video = Backbone::inflate(model.unet);
            const VideoCorpus clips = prepare_video_corpus(data.videos, frozen);
            TemporalTrainer tr(cfg, frozen, model, video, clips, corpus);
            if (!a.resume.empty()) tr.resume(a.resume);
            write_json(run.temporal() / "config.json", cfg);
            train_loop(tr, *settings, run.temporal(), out);
        }
    }
    write_json(run.config(), cfg);
    return ok;
}

// ---------------------------------------------------------------- sample / sweep

struct SampleArgs {
    fs::path content;
    fs::path content_dir;
    fs::path style;
    fs::path ckpt;
    fs::path out;
    double wo = 1.0, wc = 0.0, ws = 0.0;
    std::vector<std::string> adapters;
    int steps = 20;
    std::uint64_t seed = 0;
    bool per_frame = false;
};

struct AdapterSpec {
    ControlKind kind;
    double weight;
};

AdapterSpec parse_adapter(const std::string& s) {
    const auto colon = s.find(':');
    const ControlKind kind = parse_control_kind(s.substr(0, colon));
    double w = 1.0;
    if (colon != std::string::npos) {
        std::size_t used = 0;
        try {
            w = std::stod(s.substr(colon + 1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() - colon - 1 || !std::isfinite(w))
            throw ArgumentError("bad adapter weight in '" + s + "' (expected KIND:WEIGHT)");
    }
    return {kind, w};
}

/// Everything a sampling command needs, loaded once.
struct Session {
    RunDir run;
    PipelineConfig cfg;
    FrozenModels frozen;
    ImageModel model;
    std::optional<Backbone> video;
    std::map<ControlKind, StyleAdapter> adapters;
    NoiseSchedule schedule;

    Session(const fs::path& root, bool want_video, const std::vector<AdapterSpec>& specs)
        : run{root}, cfg(run.load_config()), frozen(run.load_frozen()), model(run.load_image()),
          schedule(cfg.schedule()) {
        if (want_video && checkpoint_exists(run.temporal() / "unet")) {
            video = Backbone::load(run.temporal() / "unet");
            video->params().set_trainable(false);
        }
        for (const AdapterSpec& s : specs) {
            if (adapters.count(s.kind)) continue;
            const fs::path p = run.adapter(s.kind) / "adapter";
            if (!checkpoint_exists(p)) throw StateError("missing dependency: adapter checkpoint " + p.string());
            adapters.emplace(s.kind, StyleAdapter::load(p));
        }
    }

    /// content [B, 3, H, W] -> pixels [B, 3, H, W]; video mode samples windows of the clip.
    Tensor render(const Tensor& content, const Tensor& style, const std::vector<AdapterSpec>& specs,
                  const StylizeSettings& s, bool as_video) const {
        const int B = content.dim(0);
        const Backbone& unet = as_video && video ? *video : model.unet;
        const int window = as_video && video ? cfg.stage.temporal.frames : B;
        std::vector<Tensor> parts;
        for (int start = 0; start < B; start += window) {
            const int n = std::min(window, B - start);
            const Tensor c = slice_leading(content, start, n);
            std::vector<AdapterInput> ins;
            for (const AdapterSpec& a : specs) ins.push_back({&adapters.at(a.kind), control_maps(c, a.kind), a.weight});
            parts.push_back(stylize(frozen, model, unet, c, style, ins, s, schedule));
        }
        return concat_leading(parts);
    }
};

json settings_json(const SampleArgs& a, const std::vector<AdapterSpec>& specs) {
    json ad = json::array();
    for (const AdapterSpec& s : specs) ad.push_back({{"kind", to_string(s.kind)}, {"weight", s.weight}});
    json j = {{"style", a.style.string()},
              {"ckpt", a.ckpt.string()},
              {"weights", {{"wo", a.wo}, {"wc", a.wc}, {"ws", a.ws}}},
              {"adapters", ad},
              {"sampler", {{"steps", a.steps}, {"eta", 0.0}, {"seed", a.seed}}}};
    if (!a.content.empty()) j["content"] = a.content.string();
    if (!a.content_dir.empty()) j["content_dir"] = a.content_dir.string();
    return j;
}

Tensor load_content(const SampleArgs& a, bool& video) {
    if (a.content.empty() == a.content_dir.empty())
        throw ArgumentError("give exactly one of --content and --content-dir");
    video = !a.content_dir.empty();
    if (!video) return batch1(read_png(a.content));
    std::vector<Image> frames = load_image_folder(a.content_dir).items;
    if (frames.empty()) throw ArgumentError("no PNG frames in " + a.content_dir.string());
    std::vector<Tensor> px;
    for (const Image& f : frames) {
        if (f.pixels.shape() != frames.front().pixels.shape())
            throw ArgumentError("frames in " + a.content_dir.string() + " differ in size");
        px.push_back(f.pixels);
    }
    return stack(px);
}

StylizeSettings stylize_settings(const SampleArgs& a, const PipelineConfig& cfg) {
    StylizeSettings s;
    s.w = {a.wo, a.wc, a.ws};
    s.w.validate();
    s.sampler.steps = a.steps;
    s.sampler.seed = a.seed;
    s.sampler.validate(cfg.diffusion.T);
    return s;
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
    std::vector<AdapterSpec> specs;
    for (const std::string& s : a.adapters) specs.push_back(parse_adapter(s));
    StyleScalingFactors{a.wo, a.wc, a.ws}.validate();
    bool video = false;
    const Tensor content = load_content(a, video);
    const Tensor style = batch1(read_png(a.style));
    const bool use_video_model = video && !a.per_frame;
    const Session ses(a.ckpt, use_video_model, specs);
    const StylizeSettings s = stylize_settings(a, ses.cfg);
    const Tensor px = ses.render(content, style, specs, s, use_video_model);

    json side = {{"schema", kRunSchema}, {"command", "sample"}, {"settings", settings_json(a, specs)},
                 {"config", ses.cfg}};
    if (!video) {
        if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
        write_png(a.out, item(px, 0));
        side["output"] = a.out.filename().string();
        fs::path sc = a.out;
        write_json(sc.replace_extension(".json"), side);
    } else {
        fs::create_directories(a.out);
        json files = json::array();
        for (int k = 0; k < px.dim(0); ++k) {
            const std::string f = frame_name(k) + ".png";
            write_png(a.out / f, item(px, k));
            files.push_back(f);
        }
        side["model"] = use_video_model && ses.video ? "video" : "image-per-frame";
        side["output"] = files;
        write_json(a.out / "run.json", side);
    }
    out << "wrote " << a.out.string() << "\n";
    return ok;
}

// 3x5 glyphs for value labels.
const std::map<char, const char*>& glyphs() {
    static const std::map<char, const char*> g{
        {'0', "111101101101111"}, {'1', "010110010010111"}, {'2', "111001111100111"}, {'3', "111001111001111"},
        {'4', "101101111001001"}, {'5', "111100111001111"}, {'6', "111100111101111"}, {'7', "111001001001001"},
        {'8', "111101111101111"}, {'9', "111101111001111"}, {'.', "000000000000010"}, {'-', "000000111000000"},
        {'e', "000111101110111"}, {'+', "000010111010000"}};
    return g;
}

void draw_label(Tensor& img, int x0, int y0, const std::string& text) {
    const int H = img.dim(1), W = img.dim(2);
    int x = x0;
    for (char ch : text) {
        auto it = glyphs().find(ch);
        if (it != glyphs().end())
            for (int r = 0; r < 5; ++r)
                for (int c = 0; c < 3; ++c)
                    if (it->second[r * 3 + c] == '1' && y0 + r < H && x + c < W)
                        for (int k = 0; k < 3; ++k) img.at({k, y0 + r, x + c}) = 1.0;
        x += 4;
    }
}

std::string label_of(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct SweepArgs : SampleArgs {
    std::string axis;
    std::vector<double> values;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    if (a.values.empty()) throw ArgumentError("--values needs at least one value");
    if (!a.content_dir.empty()) throw ArgumentError("sweep works on single images (--content)");
    std::vector<AdapterSpec> base;
    for (const std::string& s : a.adapters) base.push_back(parse_adapter(s));
    std::optional<ControlKind> axis_kind;
    if (a.axis.rfind("adapter:", 0) == 0) {
        axis_kind = parse_control_kind(a.axis.substr(8));
        std::erase_if(base, [&](const AdapterSpec& s) { return s.kind == *axis_kind; });
    } else if (a.axis != "scaling") {
        throw ArgumentError("unknown sweep axis '" + a.axis + "' (expected scaling or adapter:KIND)");
    }
    struct Cell {
        SampleArgs args;
        std::vector<AdapterSpec> specs;
    };
    std::vector<Cell> cells;
    for (double v : a.values) {
        Cell c{a, base};
        if (axis_kind) {
            c.specs.push_back({*axis_kind, v});
        } else {
            if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("scaling values must lie in [0, 1]");
            c.args.wo = v;
            c.args.wc = c.args.ws = (1.0 - v) / 2.0;
        }
        StyleScalingFactors{c.args.wo, c.args.wc, c.args.ws}.validate();
        cells.push_back(std::move(c));
    }
    std::vector<AdapterSpec> all = base;
    if (axis_kind) all.push_back({*axis_kind, 1.0});
    bool video = false;
    const Tensor content = load_content(a, video);
    const Tensor style = batch1(read_png(a.style));
    const Session ses(a.ckpt, false, all);

    fs::create_directories(a.out);
    const int H = content.dim(2), W = content.dim(3), strip = 7, gap = 2;
    const int n = static_cast<int>(cells.size());
    Tensor grid({3, H + strip, n * W + (n - 1) * gap});
    for (std::size_t i = 0; i < grid.numel(); ++i) grid[i] = -1.0;
    json list = json::array();
    for (int i = 0; i < n; ++i) {
        const Cell& c = cells[i];
        const Tensor px = ses.render(content, style, c.specs, stylize_settings(c.args, ses.cfg), false);
        const Tensor img = item(px, 0);
        const std::string f = numbered("cell", i) + ".png";
        write_png(a.out / f, img);
        // Cells go through the PNG quantizer so the grid matches the files.
        const Tensor q = read_png(a.out / f);
        const int x0 = i * (W + gap);
        for (int k = 0; k < 3; ++k)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) grid.at({k, strip + y, x0 + x}) = q.at({k, y, x});
        draw_label(grid, x0 + 1, 1, label_of(a.values[i]));
        list.push_back({{"file", f}, {"value", a.values[i]}, {"settings", settings_json(c.args, c.specs)}});
    }
    write_png(a.out / "grid.png", grid);
    json side = {{"schema", kRunSchema}, {"command", "sweep"}, {"axis", a.axis},
                 {"path", axis_kind ? "adapter weight = v" : "wo = v, wc = ws = (1 - v) / 2"},
                 {"cells", list}, {"config", ses.cfg}};
    write_json(a.out / "sweep.json", side);
    out << "wrote " << n << " cells to " << a.out.string() << "\n";
    return ok;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    fs::path pred;
    fs::path style;
    fs::path content_dir;
    fs::path flow_dir;
    fs::path ckpt;
    fs::path out;
    std::vector<int> gaps{1};
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const RunDir run{a.ckpt};
    if (!checkpoint_exists(run.features()))
        throw StateError("missing dependency: feature-net checkpoint " + run.features().string());
    const FeatureNet net = FeatureNet::load(run.features());
    EvalInputs in;
    in.pred_dir = a.pred;
    if (!a.style.empty()) in.style = a.style;
    if (!a.content_dir.empty()) in.content_dir = a.content_dir;
    if (!a.flow_dir.empty()) in.flow_dir = a.flow_dir;
    in.gaps = a.gaps;
    const json r = eval_report(in, net);
    if (a.out.empty()) out << r.dump(2) << "\n";
    else write_json(a.out, r);
    return ok;
}

void add_sample_options(CLI::App* c, SampleArgs& a) {
    c->add_option("--content", a.content, "content image (PNG)");
    c->add_option("--content-dir", a.content_dir, "directory of content frames (video)");
    c->add_option("--style", a.style, "style image (PNG)")->required();
    c->add_option("--ckpt", a.ckpt, "training run directory")->required();
    c->add_option("--out", a.out, "output PNG, or directory for video and sweeps")->required();
    c->add_option("--wo", a.wo, "full-branch weight");
    c->add_option("--wc", a.wc, "content-only branch weight");
    c->add_option("--ws", a.ws, "style-only branch weight");
    c->add_option("--adapter", a.adapters, "KIND:WEIGHT, repeatable");
    c->add_option("--steps", a.steps, "DDIM steps");
    c->add_option("--seed", a.seed, "sampler seed");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"hicast: latent-diffusion style transfer for images and video"};
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus");
    gen->add_option("--out", gd.out)->required();
    gen->add_option("--images", gd.images, "content and style images each");
    gen->add_option("--videos", gd.videos);
    gen->add_option("--frames", gd.frames);
    gen->add_option("--size", gd.size);
    gen->add_option("--seed", gd.seed);
    gen->add_flag("--force", gd.force, "replace a non-empty output directory");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "run one training stage");
    train->add_option("--stage", tr.stage, "codec | features | image | adapter:KIND | temporal")->required();
    train->add_option("--config", tr.config, "pipeline config JSON");
    train->add_option("--out", tr.out, "run directory")->required();
    train->add_option("--resume", tr.resume, "stage directory to resume from");
    train->add_option("--steps", tr.steps, "override the stage's step count");
    train->add_option("--seed", tr.seed, "override the stage's seed");

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "stylize an image or a frame folder");
    add_sample_options(sample, sa);
    sample->add_flag("--per-frame", sa.per_frame, "use the image model for every frame");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "grid of samples along one axis");
    add_sample_options(sweep, sw);
    sweep->add_option("--axis", sw.axis, "scaling | adapter:KIND")->required();
    sweep->add_option("--values", sw.values, "comma-separated values")->required()->delimiter(',');

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "metrics report");
    eval->add_option("--pred", ev.pred, "stylized frames or images")->required();
    eval->add_option("--style", ev.style);
    eval->add_option("--content-dir", ev.content_dir);
    eval->add_option("--flow-dir", ev.flow_dir);
    eval->add_option("--ckpt", ev.ckpt, "run directory holding the feature net")->required();
    eval->add_option("--gaps", ev.gaps, "frame gaps for the temporal metric")->delimiter(',');
    eval->add_option("--out", ev.out, "report path (stdout if absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*gen) return cmd_gen_data(gd, out);
        if (*train) return cmd_train(tr, out);
        if (*sample) return cmd_sample(sa, out);
        if (*sweep) return cmd_sweep(sw, out);
        if (*eval) return cmd_eval(ev, out);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return usage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return usage;
    } catch (const StateError& e) {
        err << "error: " << e.what() << "\n";
        return missing_dependency;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return missing_dependency;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return numeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return failure;
    }
    return usage;
}

}  // namespace hicast::cli
