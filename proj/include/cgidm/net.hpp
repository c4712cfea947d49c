// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgidm/grid.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

/// Sinusoidal embedding, interleaved (sin, cos) pairs with frequency
/// 1 / 10000^(2k/dim). `dim` must be even; t = 0 is accepted as a probe.
std::vector<double> time_embedding(int t, std::size_t dim, int T);

struct LoraAdapter {
    std::size_t rank = 0;
    double scale = 1.0;
    std::vector<double> a;  // rank x in
    std::vector<double> b;  // out x rank, zero at creation
};

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;
    std::optional<LoraAdapter> lora;
};

struct NetConfig {
    std::size_t rows = 16;
    std::size_t cols = 16;
    std::size_t time_embed_dim = 16;
    int T = 100;
    std::vector<std::size_t> hidden{256, 256};
    // metadata only: the model was trained on autoencoder latents
    bool latent = false;
    /// Data standard deviation for the fixed linear skip term
    ///   c(t) x_t,  c(t) = sqrt(1 - a_t) / (a_t s^2 + 1 - a_t),
    /// the least-squares linear noise estimate for data of variance s^2.
    /// 0 disables the term. a_t follows the linear beta schedule below.
    double skip_std = 0.0;
    double beta_min = 1e-4;
    double beta_max = 0.02;
};

enum class ParamSelection { all, base, adapters };

/// Dense noise predictor eps_theta(x_t, t). Input is the flattened image
/// followed by the time embedding; hidden layers use SiLU; the output layer
/// is linear and has the image's size. An optional fixed skip term adds
/// c(t) x_t to the output (see NetConfig::skip_std).
class NoisePredictor {
public:
    NoisePredictor() = default;
    /// Gaussian init with std 1/sqrt(fan_in); the output layer starts at zero.
    NoisePredictor(NetConfig config, Rng& rng);
    /// Build from explicit layers (used by checkpoint loading and tests).
    NoisePredictor(NetConfig config, std::vector<DenseLayer> layers);

    const NetConfig& config() const noexcept { return config_; }
    Shape image_shape() const { return {config_.rows, config_.cols}; }
    std::size_t image_size() const { return config_.rows * config_.cols; }
    /// c(t) of the skip term; 0 when disabled or t = 0.
    double skip_coefficient(int t) const;

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    /// Attach a low-rank adapter to every weight matrix. A ~ N(0, 1/in), B = 0.
    void add_lora(std::size_t rank, double scale, Rng& rng);
    bool has_lora() const;
    /// Plain model whose weights are W + scale * B * A.
    NoisePredictor merged() const;

    std::vector<std::span<double>> parameter_blocks(ParamSelection which = ParamSelection::all);
    std::vector<std::span<const double>> parameter_blocks(ParamSelection which = ParamSelection::all) const;
    std::size_t parameter_count(ParamSelection which = ParamSelection::all) const;

    bool operator==(const NoisePredictor& other) const;

private:
    void validate() const;

    NetConfig config_;
    std::vector<DenseLayer> layers_;
};

/// Gradient buffers laid out like NoisePredictor::parameter_blocks(all).
struct ParamGrads {
    std::vector<std::vector<double>> blocks;

    static ParamGrads zeros_like(const NoisePredictor& model);
    void clear();
    void scale(double s);
    std::vector<std::span<const double>> select(const NoisePredictor& model, ParamSelection which) const;
};

struct BackwardResult {
    ParamGrads params;
    Grid input;
};

Grid predict_noise(const NoisePredictor& model, const Grid& x_t, int t);

/// Gradients of <upstream, eps_theta(x_t, t)> w.r.t. all parameters and
/// w.r.t. the image part of the input.
BackwardResult backward(const NoisePredictor& model, const Grid& x_t, int t, const Grid& upstream);

/// Input gradient only; skips the parameter outer products.
Grid input_gradient(const NoisePredictor& model, const Grid& x_t, int t, const Grid& upstream);

/// Forward pass, then accumulate parameter gradients of <upstream, output>
/// into `acc`. `upstream_fn` receives the prediction and returns the
/// upstream gradient; this keeps loss-specific code outside the network.
/// Returns the prediction. Base weight gradients are skipped when
/// `which == adapters`.
template <typename UpstreamFn>
Grid forward_backward(const NoisePredictor& model, const Grid& x_t, int t, UpstreamFn&& upstream_fn,
                      ParamGrads& acc, ParamSelection which = ParamSelection::all);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params);
};

/// One bias-corrected Adam update. NaN or Inf in grads throws before any
/// parameter is touched.
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads);

/// Linear autoencoder: latent = We * x + be, image = clamp(Wd * z + bd).
class AutoEncoder {
public:
    AutoEncoder() = default;
    AutoEncoder(Shape image_shape, Shape latent_shape, Rng& rng);
    /// Square identity encoder and decoder; latent shape equals image shape.
    static AutoEncoder identity(Shape image_shape);

    const Shape& image_shape() const noexcept { return image_shape_; }
    const Shape& latent_shape() const noexcept { return latent_shape_; }

    Grid encode(const Grid& x) const;
    Grid decode(const Grid& z) const;
    /// Decoder output before clamping.
    Grid decode_raw(const Grid& z) const;

    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;

    bool operator==(const AutoEncoder&) const = default;

private:
    friend double train_autoencoder(AutoEncoder&, std::span<const Grid>, int, double, Rng&);

    Shape image_shape_;
    Shape latent_shape_;
    std::vector<double> enc_w_, enc_b_, dec_w_, dec_b_;
};

/// Full-batch Adam on mean squared reconstruction error. Returns final MSE.
double train_autoencoder(AutoEncoder& ae, std::span<const Grid> images, int epochs, double learning_rate, Rng& rng);
double reconstruction_mse(const AutoEncoder& ae, std::span<const Grid> images);

/// Checkpoint format: "CGIDM1\n", one manifest line, then every parameter as
/// a little-endian IEEE-754 double in declaration order.
void save_checkpoint(const std::filesystem::path& path, const NoisePredictor& model,
                     const std::string& config_hash = {});
NoisePredictor load_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);
void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae, const std::string& config_hash = {});
AutoEncoder load_autoencoder(const std::filesystem::path& path, std::string* config_hash = nullptr);

std::string serialize_checkpoint(const NoisePredictor& model, const std::string& config_hash = {});
NoisePredictor parse_checkpoint(const std::string& bytes, std::string* config_hash = nullptr);

// ---------------------------------------------------------------------------

namespace detail {

struct Activations {
    std::vector<std::vector<double>> inputs;  // input of each layer
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
    std::vector<std::vector<double>> lora_h;  // A * input per layer (empty without lora)
    std::vector<double> output;
    double skip = 0.0;  // skip coefficient applied to the image input
};

void forward(const NoisePredictor& model, const Grid& x_t, int t, Activations& act);
/// Back-propagate `upstream`; writes parameter grads into `acc` (if non-null)
/// and the image gradient into `input_grad` (if non-null).
void backpropagate(const NoisePredictor& model, const Activations& act, std::span<const double> upstream,
                   ParamGrads* acc, ParamSelection which, Grid* input_grad);

}  // namespace detail

template <typename UpstreamFn>
Grid forward_backward(const NoisePredictor& model, const Grid& x_t, int t, UpstreamFn&& upstream_fn,
                      ParamGrads& acc, ParamSelection which) {
    detail::Activations act;
    detail::forward(model, x_t, t, act);
    Grid prediction(model.image_shape(), act.output);
    const Grid upstream = upstream_fn(static_cast<const Grid&>(prediction));
    detail::backpropagate(model, act, upstream.values(), &acc, which, nullptr);
    return prediction;
}

}  // namespace cgidm
