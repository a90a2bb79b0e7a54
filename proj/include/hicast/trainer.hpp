// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hicast/config.hpp"
#include "hicast/optim.hpp"
#include "hicast/synth.hpp"

namespace hicast {

enum class SupervisionMode { content_style = 0, style_style = 1, none_style = 2, content_none = 3 };

std::string to_string(SupervisionMode m);
SupervisionMode sample_supervision(Rng& rng, const SupervisionProbs& p);

/// Training and validation material, synthesized or read from a gen-data folder.
struct TrainingData {
    std::vector<Image> content;
    std::vector<Image> style;
    std::vector<VideoClip> videos;
    std::vector<Image> content_validation;
    std::vector<Image> style_validation;
    std::vector<VideoClip> video_validation;
};

TrainingData load_training_data(const DataConfig& cfg);

/// The frozen stage-0 substitutes for the pretrained autoencoder and VGG.
struct FrozenModels {
    Codec codec;
    FeatureNet features;
};

Codec train_stage0_codec(const PipelineConfig& cfg, const TrainingData& data, CodecTrainReport* report = nullptr);
FeatureNet train_stage0_features(const PipelineConfig& cfg, const TrainingData& data,
                                 FeatureTrainReport* report = nullptr);

/// Everything stage 1 trains.
struct ImageModel {
    Conditioner cond;
    Backbone unet;
    Discriminators disc;

    ImageModel(const PipelineConfig& cfg, std::uint64_t seed);
    ImageModel(Conditioner c, Backbone u, Discriminators d);

    void set_trainable(bool on);
    /// Subdirectories cond/, unet/, disc/.
    void save(const std::filesystem::path& dir, long step) const;
    static ImageModel load(const std::filesystem::path& dir);
};

/// Codec latents and style statistics of a corpus, computed once with the
/// frozen models.
struct Corpus {
    std::vector<Image> content;
    std::vector<Image> style;
    Tensor content_pixels;   // [Nc, 3, H, W]
    Tensor style_pixels;     // [Ns, 3, H, W]
    Tensor content_latents;  // [Nc, c, h, w]
    Tensor style_latents;    // [Ns, c, h, w]
    Tensor style_stats;      // [Ns, S]
};

Corpus prepare_corpus(std::vector<Image> content, std::vector<Image> style, const FrozenModels& frozen);

struct VideoCorpus {
    std::vector<VideoClip> clips;
    int frames = 0;          // frames per clip
    Tensor pixels;           // [clips * frames, 3, H, W]
    Tensor latents;          // [clips * frames, c, h, w]
};

VideoCorpus prepare_video_corpus(std::vector<VideoClip> clips, const FrozenModels& frozen);

/// One training input row.
struct BatchItem {
    SupervisionMode mode = SupervisionMode::content_style;
    std::string content_input_id;  // empty when the content input is null
    std::string style_input_id;    // empty when the style input is null
    bool content_null = false;
    bool style_null = false;
    std::string target_id;         // image whose latent is the noise target
    int content_index = -1;        // into Corpus::content
    int style_index = -1;          // into Corpus::style
    int timestep = 0;
};

BatchItem build_batch_item(SupervisionMode mode, const Corpus& corpus, int content_index, int style_index, int t);

struct Batch {
    std::vector<BatchItem> items;
    std::vector<int> timesteps;
    std::vector<bool> content_null, style_null;
    Tensor z0;               // noise target latents [B, c, h, w]
    Tensor content_latents;  // content-encoder inputs (zeros for null rows)
    Tensor style_stats;      // [B, S] (zeros for null rows)
    Tensor style_pixels;     // [B, 3, H, W] (zeros for null rows)
    Tensor noise;            // [B, c, h, w]
    std::vector<int> styled_rows;  // rows with a real style input
};

Batch assemble_batch(const Corpus& corpus, const std::vector<BatchItem>& items, Tensor noise);
/// Draws modes, indices, timesteps and noise from rng.
Batch draw_batch(const Corpus& corpus, const StageSettings& s, int T, Rng& rng);

struct StepReport {
    long step = 0;
    double content = 0, style = 0, gan = 0, patch_gan = 0, disc = 0, patch_disc = 0;
    double hg_noise = 0, hg_image = 0, local = 0;
    double total = 0;
    std::array<int, 4> modes{};
};

/// Column names and values for the loss log.
std::vector<std::string> report_columns();
std::vector<double> report_values(const StepReport& r);

class ImageTrainer {
public:
    ImageTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model, const Corpus& corpus);

    StepReport step();
    long steps_done() const { return step_; }

    /// Models plus optimizer state, so a resumed run repeats the same next step.
    void save(const std::filesystem::path& dir) const;
    void resume(const std::filesystem::path& dir);

private:
    const PipelineConfig& cfg_;
    const FrozenModels& frozen_;
    ImageModel& model_;
    const Corpus& corpus_;
    NoiseSchedule schedule_;
    Adam gen_opt_;
    Adam disc_opt_;
    long step_ = 0;
};

class AdapterTrainer {
public:
    /// Freezes the image model; only the adapter is trained.
    AdapterTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model, StyleAdapter& adapter,
                   const Corpus& corpus);

    StepReport step();
    long steps_done() const { return step_; }
    void save(const std::filesystem::path& dir) const;
    void resume(const std::filesystem::path& dir);

private:
    const PipelineConfig& cfg_;
    const FrozenModels& frozen_;
    ImageModel& model_;
    StyleAdapter& adapter_;
    const Corpus& corpus_;
    NoiseSchedule schedule_;
    Tensor maps_;  // control maps of the content corpus, [Nc, 1, H, W]
    Adam opt_;
    long step_ = 0;
};

class TemporalTrainer {
public:
    /// video must be inflated from model.unet; only its temporal layers train.
    TemporalTrainer(const PipelineConfig& cfg, FrozenModels& frozen, ImageModel& model, Backbone& video,
                    const VideoCorpus& clips, const Corpus& styles);

    StepReport step();
    long steps_done() const { return step_; }
    void save(const std::filesystem::path& dir) const;
    void resume(const std::filesystem::path& dir);

private:
    const PipelineConfig& cfg_;
    const FrozenModels& frozen_;
    ImageModel& model_;
    Backbone& video_;
    const VideoCorpus& clips_;
    const Corpus& styles_;
    NoiseSchedule schedule_;
    Adam opt_;
    long step_ = 0;
};

/// Rows idx of a tensor's leading dimension.
Tensor gather_rows(const Tensor& t, const std::vector<int>& idx);

}  // namespace hicast
