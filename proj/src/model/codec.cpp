// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/codec.hpp"

#include <algorithm>
#include <cmath>

#include "hicast/checkpoint.hpp"
#include "hicast/errors.hpp"
#include "hicast/optim.hpp"

namespace hicast {

void CodecConfig::validate() const {
    if (factor != 2 && factor != 4 && factor != 8)
        throw ConfigError("codec factor must be 2, 4 or 8, got " + std::to_string(factor));
    if (latent_channels < 1) throw ConfigError("codec latent_channels must be >= 1");
    if (base_channels < 1) throw ConfigError("codec base_channels must be >= 1");
}

int CodecConfig::downsamples() const { return factor == 2 ? 1 : factor == 4 ? 2 : 3; }

void to_json(nlohmann::json& j, const CodecConfig& c) {
    j = {{"factor", c.factor}, {"latent_channels", c.latent_channels}, {"base_channels", c.base_channels}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
    c.factor = j.value("factor", c.factor);
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.base_channels = j.value("base_channels", c.base_channels);
}

Codec::Codec(CodecConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "codec-init"));
    const int n = cfg_.downsamples();
    // Level i runs at 1/2^i resolution.
    auto width = [this](int level) { return cfg_.base_channels * (level <= 1 ? 2 : 4); };
    auto make_res = [&](const std::string& name, int ch) {
        return Res{nn::Conv2d(params_, name + ".conv0", ch, ch, 3, 1, rng),
                   nn::Conv2d(params_, name + ".conv1", ch, ch, 3, 1, rng)};
    };

    enc_in_ = nn::Conv2d(params_, "enc.in", 12, width(1), 3, 1, rng);
    for (int i = 2; i <= n; ++i) {
        enc_level_res_.push_back(make_res("enc.res" + std::to_string(i - 1), width(i - 1)));
        enc_down_.emplace_back(params_, "enc.down" + std::to_string(i), width(i - 1), width(i), 3, 2, rng);
    }
    enc_res_ = make_res("enc.res", width(n));
    enc_out_ = nn::Conv2d(params_, "enc.out", width(n), cfg_.latent_channels, 1, 1, rng);

    dec_in_ = nn::Conv2d(params_, "dec.in", cfg_.latent_channels, width(n), 3, 1, rng);
    dec_res_ = make_res("dec.res", width(n));
    for (int i = n; i >= 2; --i) {
        dec_up_.emplace_back(params_, "dec.up" + std::to_string(i), width(i), width(i - 1), 3, 1, rng);
        dec_up_res_.push_back(make_res("dec.up" + std::to_string(i) + ".res", width(i - 1)));
    }
    dec_out_ = nn::Conv2d(params_, "dec.out", width(1), 12, 3, 1, rng);
}

Var Codec::res(const Res& r, const Var& x) const { return ops::add(x, r.b(ops::silu(r.a(ops::silu(x))))); }

void Codec::mark_trained(double latent_scale) {
    if (!(latent_scale > 0.0) || !std::isfinite(latent_scale)) throw NumericError("latent scale must be positive");
    trained_ = true;
    latent_scale_ = latent_scale;
}

Var Codec::encode_raw(const Var& images) const {
    if (images.shape().size() != 4 || images.dim(1) != 3)
        throw ArgumentError("codec encode expects [N,3,H,W], got " + shape_str(images.shape()));
    if (images.dim(2) % cfg_.factor || images.dim(3) % cfg_.factor)
        throw ArgumentError("image size " + shape_str(images.shape()) + " not divisible by codec factor " +
                            std::to_string(cfg_.factor));
    Var h = ops::silu(enc_in_(ops::pixel_unshuffle(images, 2)));
    for (std::size_t i = 0; i < enc_down_.size(); ++i) h = ops::silu(enc_down_[i](res(enc_level_res_[i], h)));
    return enc_out_(res(enc_res_, h));
}

Var Codec::encode_batch(const Var& images) const { return ops::scale(encode_raw(images), latent_scale_); }

Var Codec::decode_batch(const Var& latents) const {
    if (latents.shape().size() != 4 || latents.dim(1) != cfg_.latent_channels)
        throw ArgumentError("codec decode expects [N," + std::to_string(cfg_.latent_channels) + ",h,w], got " +
                            shape_str(latents.shape()));
    Var h = res(dec_res_, ops::silu(dec_in_(ops::scale(latents, 1.0 / latent_scale_))));
    for (std::size_t i = 0; i < dec_up_.size(); ++i)
        h = res(dec_up_res_[i], ops::silu(dec_up_[i](ops::upsample_nearest2(h))));
    return ops::pixel_shuffle(dec_out_(h), 2);
}

Var Codec::decode_images(const Var& latents) const { return ops::clamp(decode_batch(latents), -1.0, 1.0); }

void Codec::require_trained() const {
    if (!trained_) throw StateError("codec is not trained");
}

Latent Codec::encode(const Image& image) const {
    require_trained();
    validate_image(image, cfg_.factor);
    Tensor z = encode_tensor(image.pixels.reshaped({1, 3, image.height(), image.width()}));
    Latent out;
    out.values = z.reshaped({z.dim(1), z.dim(2), z.dim(3)});
    out.source_height = image.height();
    out.source_width = image.width();
    return out;
}

Image Codec::decode(const Latent& latent) const {
    require_trained();
    const Tensor& v = latent.values;
    if (v.rank() != 3) throw ArgumentError("latent must be [c,h,w]");
    Tensor x = decode_tensor(v.reshaped({1, v.dim(0), v.dim(1), v.dim(2)}));
    Image img;
    img.pixels = x.reshaped({3, x.dim(2), x.dim(3)});
    img.id = "decoded";
    return img;
}

Tensor Codec::encode_tensor(const Tensor& images) const {
    ag::NoGradGuard ng;
    return encode_batch(Var(images)).value();
}

Tensor Codec::decode_tensor(const Tensor& latents) const {
    ag::NoGradGuard ng;
    if (!latents.all_finite()) throw NumericError("non-finite latent passed to decode");
    Tensor x = decode_batch(Var(latents)).value();
    for (double& v : x.storage()) v = std::clamp(v, -1.0, 1.0);
    return x;
}

void Codec::save(const std::filesystem::path& dir, long step) const {
    CheckpointInfo info;
    info.module = "codec";
    info.config = cfg_;
    info.seed = seed_;
    info.step = step;
    info.extra = {{"trained", trained_}, {"latent_scale", latent_scale_}};
    save_checkpoint(dir, info, params_.snapshot());
}

Codec Codec::load(const std::filesystem::path& dir) {
    LoadedCheckpoint ck = load_checkpoint(dir);
    if (ck.info.module != "codec") throw FormatError(dir.string() + " is not a codec checkpoint");
    Codec c(ck.info.config.get<CodecConfig>(), ck.info.seed);
    c.params_.load(ck.tensors);
    if (ck.info.extra.value("trained", false)) c.mark_trained(ck.info.extra.at("latent_scale").get<double>());
    return c;
}

Tensor stack_pixels(const std::vector<Image>& images) {
    std::vector<Tensor> parts;
    parts.reserve(images.size());
    for (const Image& img : images) parts.push_back(img.pixels);
    return stack(parts);
}

CodecTrainReport train_codec(Codec& codec, const std::vector<Image>& data, const CodecTrainConfig& cfg) {
    if (data.empty()) throw ArgumentError("train_codec: empty dataset");
    for (const Image& img : data) validate_image(img, codec.config().factor);
    CodecTrainReport report;
    Rng rng(derive_seed(cfg.seed, "codec-train"));
    codec.params().set_trainable(true);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Adam opt(codec.params().trainable(), acfg);
    const Tensor all = stack_pixels(data);
    const int n = static_cast<int>(data.size());
    for (int step = 0; step < cfg.steps; ++step) {
        // cosine decay to 2% of the base rate
        const double frac = static_cast<double>(step) / cfg.steps;
        opt.set_lr(cfg.lr * (0.02 + 0.98 * 0.5 * (1.0 + std::cos(M_PI * frac))));
        std::vector<int> idx(std::min(cfg.batch, n));
        for (int& i : idx) i = rng.randint(0, n - 1);
        Var x(ops::gather_leading(Var(all), idx).value());
        Var z = codec.encode_raw(x);
        Var rec = ops::mean_square(ops::sub(codec.decode_batch(ops::scale(z, codec.latent_scale())), x));
        Var loss = ops::add(rec, ops::scale(ops::mean_square(z), cfg.latent_reg));
        ag::backward(loss);
        opt.step();
        report.losses.push_back(rec.value()[0]);
    }
    codec.params().set_trainable(false);

    // Latent scale: 1 / std of the raw latents over the corpus.
    ag::NoGradGuard ng;
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (int start = 0; start < n; start += 64) {
        const int cnt = std::min(64, n - start);
        Tensor z = codec.encode_raw(Var(slice_leading(all, start, cnt))).value();
        for (double v : z.storage()) sum += v, sq += v * v;
        count += z.numel();
    }
    const double mean = sum / count;
    const double std = std::sqrt(std::max(sq / count - mean * mean, 1e-12));
    codec.mark_trained(1.0 / std);

    Tensor rec = codec.decode_tensor(codec.encode_tensor(slice_leading(all, 0, std::min(n, 64))));
    Tensor diff = rec - slice_leading(all, 0, std::min(n, 64));
    double mse = 0.0;
    for (double v : diff.storage()) mse += v * v;
    report.final_loss = mse / diff.numel();
    return report;
}

double psnr(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ArgumentError("psnr shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.numel());
    if (mse == 0.0) return INFINITY;
    return 10.0 * std::log10(4.0 / mse);
}

}  // namespace hicast
