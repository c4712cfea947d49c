// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cgidm/error.hpp"
#include "cgidm/io.hpp"

namespace cgidm {

std::vector<double> time_embedding(int t, std::size_t dim, int T) {
    require(dim % 2 == 0, ErrorCode::invalid_argument, "time_embedding: dim must be even");
    require(t >= 0 && t <= T, ErrorCode::invalid_argument,
            "time_embedding: t=" + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    std::vector<double> emb(dim);
    for (std::size_t k = 0; k < dim / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
        emb[2 * k] = std::sin(t * freq);
        emb[2 * k + 1] = std::cos(t * freq);
    }
    return emb;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

DenseLayer make_dense(std::size_t in, std::size_t out, bool zero, Rng& rng) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.weight.assign(in * out, 0.0);
    layer.bias.assign(out, 0.0);
    if (!zero) {
        const double std = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& w : layer.weight) w = std * rng.gaussian();
    }
    return layer;
}

// y = W x + b (+ scale * B (A x)), all row-major.
void dense_forward(const DenseLayer& layer, std::span<const double> x, std::vector<double>& y,
                   std::vector<double>* lora_h) {
    y.resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
        y[o] = layer.bias[o] + dot(std::span<const double>(layer.weight.data() + o * layer.in, layer.in), x);
    }
    if (layer.lora) {
        const auto& ad = *layer.lora;
        std::vector<double> h(ad.rank);
        for (std::size_t r = 0; r < ad.rank; ++r) {
            h[r] = dot(std::span<const double>(ad.a.data() + r * layer.in, layer.in), x);
        }
        for (std::size_t o = 0; o < layer.out; ++o) {
            double s = 0.0;
            for (std::size_t r = 0; r < ad.rank; ++r) s += ad.b[o * ad.rank + r] * h[r];
            y[o] += ad.scale * s;
        }
        if (lora_h) *lora_h = std::move(h);
    } else if (lora_h) {
        lora_h->clear();
    }
}

void check_skip(const NetConfig& c) {
    require(c.skip_std >= 0.0 && std::isfinite(c.skip_std), ErrorCode::invalid_argument, "skip_std must be >= 0");
    require(c.beta_min > 0.0 && c.beta_min <= c.beta_max && c.beta_max < 1.0, ErrorCode::invalid_argument,
            "net beta bounds must satisfy 0 < beta_min <= beta_max < 1");
}

}  // namespace

NoisePredictor::NoisePredictor(NetConfig config, Rng& rng) : config_(std::move(config)) {
    check_skip(config_);
    require(config_.rows >= 1 && config_.cols >= 1, ErrorCode::invalid_argument, "image dims must be >= 1");
    require(config_.time_embed_dim % 2 == 0, ErrorCode::invalid_argument, "time_embed_dim must be even");
    require(config_.T >= 1, ErrorCode::invalid_argument, "T must be >= 1");
    std::size_t in = image_size() + config_.time_embed_dim;
    for (auto width : config_.hidden) {
        require(width >= 1, ErrorCode::invalid_argument, "hidden width must be >= 1");
        layers_.push_back(make_dense(in, width, false, rng));
        in = width;
    }
    layers_.push_back(make_dense(in, image_size(), true, rng));
}

NoisePredictor::NoisePredictor(NetConfig config, std::vector<DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
    validate();
}

double NoisePredictor::skip_coefficient(int t) const {
    if (config_.skip_std == 0.0 || t <= 0) return 0.0;
    require(t <= config_.T, ErrorCode::invalid_argument, "skip_coefficient: t beyond T");
    double a = 1.0;
    for (int s = 1; s <= t; ++s) {
        const double frac = config_.T > 1 ? static_cast<double>(s - 1) / (config_.T - 1) : 0.0;
        a *= 1.0 - (config_.beta_min + (config_.beta_max - config_.beta_min) * frac);
    }
    const double s2 = config_.skip_std * config_.skip_std;
    return std::sqrt(1.0 - a) / (a * s2 + 1.0 - a);
}

void NoisePredictor::validate() const {
    check_skip(config_);
    require(layers_.size() == config_.hidden.size() + 1, ErrorCode::format, "layer count does not match config");
    std::size_t in = image_size() + config_.time_embed_dim;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        const std::size_t out = i < config_.hidden.size() ? config_.hidden[i] : image_size();
        require(l.in == in && l.out == out, ErrorCode::format, "layer " + std::to_string(i) + " has wrong dims");
        require(l.weight.size() == in * out && l.bias.size() == out, ErrorCode::format,
                "layer " + std::to_string(i) + " has wrong parameter sizes");
        if (l.lora) {
            require(l.lora->a.size() == l.lora->rank * in && l.lora->b.size() == out * l.lora->rank,
                    ErrorCode::format, "layer " + std::to_string(i) + " adapter has wrong sizes");
        }
        in = out;
    }
}

void NoisePredictor::add_lora(std::size_t rank, double scale, Rng& rng) {
    require(rank >= 1, ErrorCode::invalid_argument, "lora rank must be >= 1");
    for (auto& layer : layers_) {
        LoraAdapter ad;
        ad.rank = rank;
        ad.scale = scale;
        ad.a.resize(rank * layer.in);
        const double std = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (auto& v : ad.a) v = std * rng.gaussian();
        ad.b.assign(layer.out * rank, 0.0);
        layer.lora = std::move(ad);
    }
}

bool NoisePredictor::has_lora() const {
    for (const auto& l : layers_) {
        if (l.lora) return true;
    }
    return false;
}

NoisePredictor NoisePredictor::merged() const {
    NoisePredictor plain = *this;
    for (auto& layer : plain.layers_) {
        if (!layer.lora) continue;
        const auto& ad = *layer.lora;
        for (std::size_t o = 0; o < layer.out; ++o) {
            for (std::size_t r = 0; r < ad.rank; ++r) {
                const double coef = ad.scale * ad.b[o * ad.rank + r];
                if (coef == 0.0) continue;
                for (std::size_t i = 0; i < layer.in; ++i) {
                    layer.weight[o * layer.in + i] += coef * ad.a[r * layer.in + i];
                }
            }
        }
        layer.lora.reset();
    }
    return plain;
}

std::vector<std::span<double>> NoisePredictor::parameter_blocks(ParamSelection which) {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
        if (which != ParamSelection::adapters) {
            out.emplace_back(l.weight);
            out.emplace_back(l.bias);
        }
        if (l.lora && which != ParamSelection::base) {
            out.emplace_back(l.lora->a);
            out.emplace_back(l.lora->b);
        }
    }
    return out;
}

std::vector<std::span<const double>> NoisePredictor::parameter_blocks(ParamSelection which) const {
    std::vector<std::span<const double>> out;
    for (auto& l : layers_) {
        if (which != ParamSelection::adapters) {
            out.emplace_back(l.weight);
            out.emplace_back(l.bias);
        }
        if (l.lora && which != ParamSelection::base) {
            out.emplace_back(l.lora->a);
            out.emplace_back(l.lora->b);
        }
    }
    return out;
}

std::size_t NoisePredictor::parameter_count(ParamSelection which) const {
    std::size_t n = 0;
    for (auto block : parameter_blocks(which)) n += block.size();
    return n;
}

bool NoisePredictor::operator==(const NoisePredictor& other) const {
    if (config_.rows != other.config_.rows || config_.cols != other.config_.cols ||
        config_.time_embed_dim != other.config_.time_embed_dim || config_.T != other.config_.T ||
        config_.hidden != other.config_.hidden || config_.latent != other.config_.latent ||
        config_.skip_std != other.config_.skip_std || config_.beta_min != other.config_.beta_min ||
        config_.beta_max != other.config_.beta_max) {
        return false;
    }
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.weight != b.weight || a.bias != b.bias || a.lora.has_value() != b.lora.has_value()) return false;
        if (a.lora && (a.lora->rank != b.lora->rank || a.lora->scale != b.lora->scale || a.lora->a != b.lora->a ||
                       a.lora->b != b.lora->b)) {
            return false;
        }
    }
    return true;
}

ParamGrads ParamGrads::zeros_like(const NoisePredictor& model) {
    ParamGrads g;
    for (auto block : model.parameter_blocks(ParamSelection::all)) g.blocks.emplace_back(block.size(), 0.0);
    return g;
}

void ParamGrads::clear() {
    for (auto& b : blocks) std::fill(b.begin(), b.end(), 0.0);
}

void ParamGrads::scale(double s) {
    for (auto& b : blocks) {
        for (auto& v : b) v *= s;
    }
}

std::vector<std::span<const double>> ParamGrads::select(const NoisePredictor& model, ParamSelection which) const {
    std::vector<std::span<const double>> out;
    std::size_t k = 0;
    for (const auto& l : model.layers()) {
        if (which != ParamSelection::adapters) {
            out.emplace_back(blocks[k]);
            out.emplace_back(blocks[k + 1]);
        }
        k += 2;
        if (l.lora) {
            if (which != ParamSelection::base) {
                out.emplace_back(blocks[k]);
                out.emplace_back(blocks[k + 1]);
            }
            k += 2;
        }
    }
    return out;
}

namespace detail {

void forward(const NoisePredictor& model, const Grid& x_t, int t, Activations& act) {
    const auto& cfg = model.config();
    if (x_t.shape() != model.image_shape()) {
        fail(ErrorCode::shape_mismatch,
             "predict_noise: input " + shape_string(x_t.shape()) + " vs model " + shape_string(model.image_shape()));
    }
    const auto& layers = model.layers();
    act.inputs.resize(layers.size());
    act.pre.resize(layers.size());
    act.lora_h.resize(layers.size());

    auto& in0 = act.inputs[0];
    in0.resize(model.image_size() + cfg.time_embed_dim);
    std::copy(x_t.values().begin(), x_t.values().end(), in0.begin());
    const auto emb = time_embedding(t, cfg.time_embed_dim, cfg.T);
    std::copy(emb.begin(), emb.end(), in0.begin() + static_cast<std::ptrdiff_t>(model.image_size()));

    for (std::size_t i = 0; i < layers.size(); ++i) {
        dense_forward(layers[i], act.inputs[i], act.pre[i], &act.lora_h[i]);
        if (i + 1 < layers.size()) {
            auto& next = act.inputs[i + 1];
            next.resize(act.pre[i].size());
            for (std::size_t j = 0; j < next.size(); ++j) next[j] = silu(act.pre[i][j]);
        }
    }
    act.output = act.pre.back();
    act.skip = model.skip_coefficient(t);
    if (act.skip != 0.0) axpy(act.skip, x_t.values(), act.output);
}

void backpropagate(const NoisePredictor& model, const Activations& act, std::span<const double> upstream,
                   ParamGrads* acc, ParamSelection which, Grid* input_grad) {
    const auto& layers = model.layers();
    require(upstream.size() == model.image_size(), ErrorCode::shape_mismatch, "backward: upstream size mismatch");

    // block offset of each layer inside ParamGrads
    std::vector<std::size_t> offset(layers.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        offset[i] = k;
        k += layers[i].lora ? 4 : 2;
    }

    const bool base_grads = acc && which != ParamSelection::adapters;
    const bool adapter_grads = acc && which != ParamSelection::base;

    std::vector<double> g(upstream.begin(), upstream.end());  // dL/d(pre-activation) of current layer
    std::vector<double> g_in;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        const auto& x = act.inputs[li];
        if (li + 1 < layers.size()) {
            for (std::size_t j = 0; j < g.size(); ++j) g[j] *= silu_grad(act.pre[li][j]);
        }
        const bool need_input = li > 0 || input_grad != nullptr;

        if (base_grads) {
            auto& dw = acc->blocks[offset[li]];
            auto& db = acc->blocks[offset[li] + 1];
            for (std::size_t o = 0; o < layer.out; ++o) {
                db[o] += g[o];
                if (g[o] != 0.0) axpy(g[o], x, std::span<double>(dw.data() + o * layer.in, layer.in));
            }
        }

        if (need_input) {
            g_in.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (g[o] != 0.0) {
                    axpy(g[o], std::span<const double>(layer.weight.data() + o * layer.in, layer.in), g_in);
                }
            }
        }

        if (layer.lora) {
            const auto& ad = *layer.lora;
            const auto& h = act.lora_h[li];
            std::vector<double> u(ad.rank, 0.0);  // B^T g
            for (std::size_t o = 0; o < layer.out; ++o) {
                for (std::size_t r = 0; r < ad.rank; ++r) u[r] += ad.b[o * ad.rank + r] * g[o];
            }
            if (adapter_grads) {
                auto& da = acc->blocks[offset[li] + 2];
                auto& dbb = acc->blocks[offset[li] + 3];
                for (std::size_t o = 0; o < layer.out; ++o) {
                    for (std::size_t r = 0; r < ad.rank; ++r) dbb[o * ad.rank + r] += ad.scale * g[o] * h[r];
                }
                for (std::size_t r = 0; r < ad.rank; ++r) {
                    if (u[r] != 0.0) axpy(ad.scale * u[r], x, std::span<double>(da.data() + r * layer.in, layer.in));
                }
            }
            if (need_input) {
                for (std::size_t r = 0; r < ad.rank; ++r) {
                    if (u[r] != 0.0) {
                        axpy(ad.scale * u[r], std::span<const double>(ad.a.data() + r * layer.in, layer.in), g_in);
                    }
                }
            }
        }

        if (li == 0) {
            if (input_grad) {
                *input_grad = Grid(model.image_shape());
                std::copy(g_in.begin(), g_in.begin() + static_cast<std::ptrdiff_t>(model.image_size()),
                          input_grad->values().begin());
                if (act.skip != 0.0) axpy(act.skip, upstream, input_grad->values());
            }
        } else {
            g.swap(g_in);
        }
    }
}

}  // namespace detail

Grid predict_noise(const NoisePredictor& model, const Grid& x_t, int t) {
    detail::Activations act;
    detail::forward(model, x_t, t, act);
    return Grid(model.image_shape(), std::move(act.output));
}

BackwardResult backward(const NoisePredictor& model, const Grid& x_t, int t, const Grid& upstream) {
    require_same_shape(upstream, Grid(model.image_shape()), "backward: upstream");
    detail::Activations act;
    detail::forward(model, x_t, t, act);
    BackwardResult result{ParamGrads::zeros_like(model), Grid()};
    detail::backpropagate(model, act, upstream.values(), &result.params, ParamSelection::all, &result.input);
    return result;
}

Grid input_gradient(const NoisePredictor& model, const Grid& x_t, int t, const Grid& upstream) {
    require(upstream.shape() == model.image_shape(), ErrorCode::shape_mismatch, "input_gradient: upstream shape");
    detail::Activations act;
    detail::forward(model, x_t, t, act);
    Grid g;
    detail::backpropagate(model, act, upstream.values(), nullptr, ParamSelection::all, &g);
    return g;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params) : config(cfg) {
    for (auto p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
}

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads) {
    require(params.size() == grads.size() && params.size() == state.m.size(), ErrorCode::shape_mismatch,
            "adam_step: block count mismatch");
    for (std::size_t b = 0; b < params.size(); ++b) {
        require(params[b].size() == grads[b].size() && params[b].size() == state.m[b].size(),
                ErrorCode::shape_mismatch, "adam_step: block size mismatch");
        require_finite(grads[b], "adam_step gradient");
    }
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        auto g = grads[b];
        auto& m = state.m[b];
        auto& v = state.v[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------

AutoEncoder::AutoEncoder(Shape image_shape, Shape latent_shape, Rng& rng)
    : image_shape_(std::move(image_shape)), latent_shape_(std::move(latent_shape)) {
    const std::size_t n = shape_size(image_shape_);
    const std::size_t m = shape_size(latent_shape_);
    enc_w_.resize(m * n);
    dec_w_.resize(n * m);
    enc_b_.assign(m, 0.0);
    dec_b_.assign(n, 0.0);
    for (auto& w : enc_w_) w = rng.gaussian() / std::sqrt(static_cast<double>(n));
    for (auto& w : dec_w_) w = rng.gaussian() / std::sqrt(static_cast<double>(m));
}

AutoEncoder AutoEncoder::identity(Shape image_shape) {
    AutoEncoder ae;
    ae.image_shape_ = image_shape;
    ae.latent_shape_ = image_shape;
    const std::size_t n = shape_size(image_shape);
    ae.enc_w_.assign(n * n, 0.0);
    ae.dec_w_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        ae.enc_w_[i * n + i] = 1.0;
        ae.dec_w_[i * n + i] = 1.0;
    }
    ae.enc_b_.assign(n, 0.0);
    ae.dec_b_.assign(n, 0.0);
    return ae;
}

namespace {

std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b, std::span<const double> x) {
    const std::size_t in = x.size();
    std::vector<double> y(b.size());
    for (std::size_t o = 0; o < b.size(); ++o) {
        y[o] = b[o] + dot(std::span<const double>(w.data() + o * in, in), x);
    }
    return y;
}

}  // namespace

Grid AutoEncoder::encode(const Grid& x) const {
    if (x.shape() != image_shape_) {
        fail(ErrorCode::shape_mismatch, "encode: " + shape_string(x.shape()) + " vs " + shape_string(image_shape_));
    }
    return Grid(latent_shape_, affine(enc_w_, enc_b_, x.values()));
}

Grid AutoEncoder::decode_raw(const Grid& z) const {
    if (z.shape() != latent_shape_) {
        fail(ErrorCode::shape_mismatch, "decode: " + shape_string(z.shape()) + " vs " + shape_string(latent_shape_));
    }
    return Grid(image_shape_, affine(dec_w_, dec_b_, z.values()));
}

Grid AutoEncoder::decode(const Grid& z) const { return clamp01(decode_raw(z)); }

std::vector<std::span<double>> AutoEncoder::parameter_blocks() {
    return {enc_w_, enc_b_, dec_w_, dec_b_};
}

std::vector<std::span<const double>> AutoEncoder::parameter_blocks() const {
    return {enc_w_, enc_b_, dec_w_, dec_b_};
}

double reconstruction_mse(const AutoEncoder& ae, std::span<const Grid> images) {
    require(!images.empty(), ErrorCode::invalid_argument, "reconstruction_mse: no images");
    double total = 0.0;
    for (const auto& x : images) {
        total += squared_distance(ae.decode(ae.encode(x)).values(), x.values()) / static_cast<double>(x.size());
    }
    return total / static_cast<double>(images.size());
}

double train_autoencoder(AutoEncoder& ae, std::span<const Grid> images, int epochs, double learning_rate, Rng& rng) {
    require(!images.empty(), ErrorCode::invalid_argument, "train_autoencoder: no images");
    const std::size_t n = shape_size(ae.image_shape_);
    const std::size_t m = shape_size(ae.latent_shape_);
    auto params = ae.parameter_blocks();
    AdamState state(AdamConfig{learning_rate}, params);
    std::vector<double> gew(m * n), geb(m), gdw(n * m), gdb(n);
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    constexpr std::size_t batch = 8;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::fill(gew.begin(), gew.end(), 0.0);
            std::fill(geb.begin(), geb.end(), 0.0);
            std::fill(gdw.begin(), gdw.end(), 0.0);
            std::fill(gdb.begin(), gdb.end(), 0.0);
            const double norm = 2.0 / static_cast<double>((end - start) * n);
            for (std::size_t k = start; k < end; ++k) {
                const auto& x = images[order[k]];
                const auto z = affine(ae.enc_w_, ae.enc_b_, x.values());
                const auto y = affine(ae.dec_w_, ae.dec_b_, z);
                std::vector<double> gy(n);
                for (std::size_t i = 0; i < n; ++i) gy[i] = norm * (y[i] - x[i]);
                std::vector<double> gz(m, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    gdb[i] += gy[i];
                    axpy(gy[i], z, std::span<double>(gdw.data() + i * m, m));
                    axpy(gy[i], std::span<const double>(ae.dec_w_.data() + i * m, m), gz);
                }
                for (std::size_t j = 0; j < m; ++j) {
                    geb[j] += gz[j];
                    axpy(gz[j], x.values(), std::span<double>(gew.data() + j * n, n));
                }
            }
            adam_step(state, params, {gew, geb, gdw, gdb});
        }
    }
    return reconstruction_mse(ae, images);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "CGIDM1\n";

void append_doubles(std::string& out, std::span<const double> values) {
    for (double v : values) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            out.push_back(static_cast<char>(bits & 0xffu));
            bits >>= 8;
        }
    }
}

void read_doubles(const std::string& bytes, std::size_t& pos, std::span<double> values) {
    require(bytes.size() >= pos + 8 * values.size(), ErrorCode::format, "checkpoint: parameter data truncated");
    for (auto& v : values) {
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]);
        }
        v = std::bit_cast<double>(bits);
        pos += 8;
    }
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

std::string manifest_line(const Manifest& m) {
    std::string line;
    for (const auto& [k, v] : m) {
        if (!line.empty()) line += ' ';
        line += k + "=" + v;
    }
    return line + "\n";
}

Manifest parse_manifest(const std::string& bytes, std::size_t& pos) {
    require(bytes.compare(0, kMagic.size(), kMagic) == 0, ErrorCode::format, "checkpoint: bad magic");
    pos = kMagic.size();
    const auto nl = bytes.find('\n', pos);
    require(nl != std::string::npos, ErrorCode::format, "checkpoint: missing manifest line");
    std::istringstream ss(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    Manifest m;
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        require(eq != std::string::npos, ErrorCode::format, "checkpoint: bad manifest token " + tok);
        m.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return m;
}

const std::string& manifest_get(const Manifest& m, const std::string& key) {
    for (const auto& [k, v] : m) {
        if (k == key) return v;
    }
    fail(ErrorCode::format, "checkpoint: manifest lacks '" + key + "'");
}

std::size_t to_size(const std::string& s) {
    try {
        std::size_t used = 0;
        auto v = std::stoull(s, &used);
        require(used == s.size(), ErrorCode::format, "checkpoint: bad integer " + s);
        return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
        fail(ErrorCode::format, "checkpoint: bad integer " + s);
    }
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s.empty() ? "none" : s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    if (s == "none") return out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_size(tok));
    return out;
}

}  // namespace

std::string serialize_checkpoint(const NoisePredictor& model, const std::string& config_hash) {
    const auto& c = model.config();
    std::size_t rank = 0;
    double scale = 1.0;
    for (const auto& l : model.layers()) {
        if (l.lora) {
            rank = l.lora->rank;
            scale = l.lora->scale;
        }
    }
    Manifest m{{"kind", "noise_predictor"},
               {"rows", std::to_string(c.rows)},
               {"cols", std::to_string(c.cols)},
               {"time_dim", std::to_string(c.time_embed_dim)},
               {"T", std::to_string(c.T)},
               {"hidden", join_sizes(c.hidden)},
               {"latent", c.latent ? "1" : "0"},
               {"lora_rank", std::to_string(rank)},
               {"lora_scale", format_double(scale)},
               {"skip_std", format_double(c.skip_std)},
               {"beta_min", format_double(c.beta_min)},
               {"beta_max", format_double(c.beta_max)},
               {"config_hash", config_hash.empty() ? "none" : config_hash}};
    std::string out(kMagic);
    out += manifest_line(m);
    for (auto block : model.parameter_blocks(ParamSelection::all)) append_doubles(out, block);
    return out;
}

NoisePredictor parse_checkpoint(const std::string& bytes, std::string* config_hash) {
    std::size_t pos = 0;
    const auto m = parse_manifest(bytes, pos);
    require(manifest_get(m, "kind") == "noise_predictor", ErrorCode::format, "checkpoint is not a noise predictor");
    NetConfig c;
    c.rows = to_size(manifest_get(m, "rows"));
    c.cols = to_size(manifest_get(m, "cols"));
    c.time_embed_dim = to_size(manifest_get(m, "time_dim"));
    c.T = static_cast<int>(to_size(manifest_get(m, "T")));
    c.hidden = split_sizes(manifest_get(m, "hidden"));
    c.latent = manifest_get(m, "latent") == "1";
    const std::size_t rank = to_size(manifest_get(m, "lora_rank"));
    const double scale = std::stod(manifest_get(m, "lora_scale"));
    c.skip_std = std::stod(manifest_get(m, "skip_std"));
    c.beta_min = std::stod(manifest_get(m, "beta_min"));
    c.beta_max = std::stod(manifest_get(m, "beta_max"));
    if (config_hash) {
        const auto& h = manifest_get(m, "config_hash");
        *config_hash = h == "none" ? std::string() : h;
    }
    require(c.rows >= 1 && c.cols >= 1 && c.time_embed_dim % 2 == 0, ErrorCode::format, "checkpoint: bad dims");

    std::vector<DenseLayer> layers;
    std::size_t in = c.rows * c.cols + c.time_embed_dim;
    auto dims = c.hidden;
    dims.push_back(c.rows * c.cols);
    for (auto out : dims) {
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.weight.resize(in * out);
        l.bias.resize(out);
        read_doubles(bytes, pos, l.weight);
        read_doubles(bytes, pos, l.bias);
        if (rank > 0) {
            LoraAdapter ad;
            ad.rank = rank;
            ad.scale = scale;
            ad.a.resize(rank * in);
            ad.b.resize(out * rank);
            read_doubles(bytes, pos, ad.a);
            read_doubles(bytes, pos, ad.b);
            l.lora = std::move(ad);
        }
        layers.push_back(std::move(l));
        in = out;
    }
    require(pos == bytes.size(), ErrorCode::format, "checkpoint: trailing bytes");
    return NoisePredictor(std::move(c), std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const NoisePredictor& model, const std::string& config_hash) {
    write_file_atomic(path, serialize_checkpoint(model, config_hash));
}

NoisePredictor load_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
    return parse_checkpoint(read_file(path), config_hash);
}

void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae, const std::string& config_hash) {
    Manifest m{{"kind", "autoencoder"},
               {"image", join_sizes(ae.image_shape())},
               {"latent_shape", join_sizes(ae.latent_shape())},
               {"config_hash", config_hash.empty() ? "none" : config_hash}};
    std::string out(kMagic);
    out += manifest_line(m);
    for (auto block : ae.parameter_blocks()) append_doubles(out, block);
    write_file_atomic(path, out);
}

AutoEncoder load_autoencoder(const std::filesystem::path& path, std::string* config_hash) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    const auto m = parse_manifest(bytes, pos);
    require(manifest_get(m, "kind") == "autoencoder", ErrorCode::format, "checkpoint is not an autoencoder");
    const Shape image = split_sizes(manifest_get(m, "image"));
    const Shape latent = split_sizes(manifest_get(m, "latent_shape"));
    if (config_hash) {
        const auto& h = manifest_get(m, "config_hash");
        *config_hash = h == "none" ? std::string() : h;
    }
    Rng unused(0);
    AutoEncoder ae(image, latent, unused);
    for (auto block : ae.parameter_blocks()) read_doubles(bytes, pos, block);
    require(pos == bytes.size(), ErrorCode::format, "checkpoint: trailing bytes");
    return ae;
}

}  // namespace cgidm
