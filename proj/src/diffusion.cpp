// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/diffusion.hpp"

#include <cmath>

#include "cgidm/error.hpp"

namespace cgidm {

NoiseSchedule NoiseSchedule::from_betas(const std::vector<double>& betas) {
    require(!betas.empty(), ErrorCode::invalid_argument, "schedule needs at least one beta");
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.beta.assign(betas.size() + 1, 0.0);
    s.alpha_cum.assign(betas.size() + 1, 1.0);
    for (std::size_t t = 1; t <= betas.size(); ++t) {
        const double b = betas[t - 1];
        require(b > 0.0 && b < 1.0, ErrorCode::invalid_argument, "beta must lie in (0, 1)");
        s.beta[t] = b;
        s.alpha_cum[t] = s.alpha_cum[t - 1] * (1.0 - b);
    }
    s.sigma2.assign(betas.size(), 0.0);
    for (std::size_t t = 0; t + 1 <= betas.size(); ++t) s.sigma2[t] = s.beta[t + 1];
    return s;
}

double NoiseSchedule::alpha(int t) const {
    require(t >= 0 && t <= T, ErrorCode::invalid_argument,
            "timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    return alpha_cum[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int T, double beta_min, double beta_max) {
    require(T >= 2, ErrorCode::invalid_argument, "build_schedule: T must be >= 2");
    require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0, ErrorCode::invalid_argument,
            "build_schedule: need 0 < beta_min <= beta_max < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        betas[static_cast<std::size_t>(t - 1)] = beta_min + (beta_max - beta_min) * (t - 1) / (T - 1);
    }
    return NoiseSchedule::from_betas(betas);
}

Grid forward_diffuse(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& sched) {
    require_same_shape(x0, eps, "forward_diffuse");
    const double a = sched.alpha(t);
    const double sa = std::sqrt(a), sn = std::sqrt(1.0 - a);
    Grid out(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = sa * x0[i] + sn * eps[i];
    return out;
}

double ddpm_loss(const NoisePredictor& model, const Grid& x0, int t, const Grid& eps, const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T, ErrorCode::invalid_argument, "ddpm_loss: t out of range");
    const Grid pred = predict_noise(model, forward_diffuse(x0, t, eps, sched), t);
    return squared_distance(pred.values(), eps.values());
}

double mean_ddpm_loss(const NoisePredictor& model, std::span<const Grid> images, const NoiseSchedule& sched,
                      int draws, std::uint64_t seed) {
    require(!images.empty() && draws >= 1, ErrorCode::invalid_argument, "mean_ddpm_loss: nothing to evaluate");
    double total = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        Rng rng = Rng(seed).split(i);
        for (int d = 0; d < draws; ++d) {
            const int t = uniform_timestep(rng, 1, sched.T);
            const Grid eps = gaussian_sample(rng, images[i].shape());
            total += ddpm_loss(model, images[i], t, eps, sched);
        }
    }
    return total / static_cast<double>(images.size() * static_cast<std::size_t>(draws));
}

namespace {

void check_model_schedule(const NoisePredictor& model, const NoiseSchedule& sched) {
    require(model.config().T == sched.T, ErrorCode::invalid_argument,
            "model T=" + std::to_string(model.config().T) + " differs from schedule T=" + std::to_string(sched.T));
}

// One minibatch term: adds d/dparams of ||eps_theta(x_t) - eps||^2 * weight to acc.
double accumulate_loss(const NoisePredictor& model, const Grid& x0, const NoiseSchedule& sched, Rng& rng,
                       double weight, ParamGrads& acc, ParamSelection which) {
    const int t = uniform_timestep(rng, 1, sched.T);
    const Grid eps = gaussian_sample(rng, x0.shape());
    const Grid x_t = forward_diffuse(x0, t, eps, sched);
    double loss = 0.0;
    forward_backward(
        model, x_t, t,
        [&](const Grid& pred) {
            Grid up(pred.shape());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double d = pred[i] - eps[i];
                loss += d * d;
                up[i] = 2.0 * weight * d;
            }
            return up;
        },
        acc, which);
    return loss;
}

void check_loss(double loss, int step) {
    if (!std::isfinite(loss)) {
        fail(ErrorCode::numerical, "training diverged at step " + std::to_string(step) + " (loss is not finite)");
    }
}

}  // namespace

NoisePredictor pretrain(std::span<const Grid> dataset, const NoiseSchedule& sched, const TrainConfig& config,
                        LossLog* log) {
    require(!dataset.empty(), ErrorCode::invalid_argument, "pretrain: empty dataset");
    require(config.steps >= 1 && config.batch >= 1, ErrorCode::invalid_argument, "pretrain: steps and batch must be >= 1");
    for (const auto& img : dataset) {
        if (img.shape() != Shape{config.net.rows, config.net.cols}) {
            fail(ErrorCode::shape_mismatch, "pretrain: image " + shape_string(img.shape()) + " vs net config");
        }
    }
    Rng rng(config.seed);
    NetConfig net = config.net;
    net.T = sched.T;
    NoisePredictor model(net, rng);
    auto params = model.parameter_blocks(ParamSelection::all);
    AdamState opt(AdamConfig{config.learning_rate}, params);
    ParamGrads grads = ParamGrads::zeros_like(model);
    const double weight = 1.0 / static_cast<double>(config.batch);

    for (int step = 1; step <= config.steps; ++step) {
        grads.clear();
        double loss = 0.0;
        for (std::size_t b = 0; b < config.batch; ++b) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1));
            loss += weight * accumulate_loss(model, dataset[idx], sched, rng, weight, grads, ParamSelection::all);
        }
        check_loss(loss, step);
        adam_step(opt, params, grads.select(model, ParamSelection::all));
        if (log) log->push_back({step, loss});
    }
    return model;
}

NoisePredictor finetune(const NoisePredictor& pretrained, std::span<const Grid> members, const FinetuneSpec& spec,
                        const NoiseSchedule& sched, Rng& rng, LossLog* log, std::span<const Grid> class_images) {
    require(!members.empty(), ErrorCode::invalid_argument, "finetune: no member images");
    require(spec.steps_per_image >= 1 && spec.batch >= 1, ErrorCode::invalid_argument,
            "finetune: steps_per_image and batch must be >= 1");
    check_model_schedule(pretrained, sched);

    std::vector<Grid> prior;
    if (spec.mode == FinetuneMode::full_with_prior) {
        if (!class_images.empty()) {
            prior.assign(class_images.begin(), class_images.end());
        } else {
            const std::size_t count = spec.prior_set_size.value_or(50 * members.size());
            require(count >= 1, ErrorCode::invalid_argument,
                    "finetune: prior preservation needs class images or a positive prior_set_size");
            prior.reserve(count);
            for (std::size_t i = 0; i < count; ++i) prior.push_back(ddpm_sample(pretrained, sched, rng));
        }
    }

    NoisePredictor model = pretrained;
    ParamSelection which = ParamSelection::all;
    if (spec.mode == FinetuneMode::lora) {
        model.add_lora(spec.lora_rank, spec.lora_scale, rng);
        which = ParamSelection::adapters;
    }
    auto params = model.parameter_blocks(which);
    AdamState opt(AdamConfig{spec.learning_rate}, params);
    ParamGrads grads = ParamGrads::zeros_like(model);
    const double weight = 1.0 / static_cast<double>(spec.batch);
    const int steps = spec.steps_per_image * static_cast<int>(members.size());

    for (int step = 1; step <= steps; ++step) {
        grads.clear();
        double loss = 0.0;
        for (std::size_t b = 0; b < spec.batch; ++b) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(members.size()) - 1));
            const Grid view = spec.augmentations.empty() ? members[idx]
                                                         : apply_defenses(members[idx], spec.augmentations, rng);
            loss += weight * accumulate_loss(model, view, sched, rng, weight, grads, which);
            if (!prior.empty()) {
                const auto pidx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(prior.size()) - 1));
                const double pw = weight * spec.prior_weight;
                loss += pw * accumulate_loss(model, prior[pidx], sched, rng, pw, grads, which);
            }
        }
        check_loss(loss, step);
        adam_step(opt, params, grads.select(model, which));
        if (log) log->push_back({step, loss});
    }
    return model;
}

namespace {

// One ancestral step x_t -> x_{t-1} using the DDPM posterior mean and variance.
void ancestral_step(const NoisePredictor& model, Grid& x, int t, const NoiseSchedule& sched, Rng& rng) {
    const Grid eps = predict_noise(model, x, t);
    const double beta = sched.beta[static_cast<std::size_t>(t)];
    const double a = sched.alpha(t);
    const double a_prev = sched.alpha(t - 1);
    const double coef = beta / std::sqrt(1.0 - a);
    const double inv = 1.0 / std::sqrt(1.0 - beta);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = inv * (x[i] - coef * eps[i]);
    if (t > 1) {
        const double sigma = std::sqrt(beta * (1.0 - a_prev) / (1.0 - a));
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += sigma * rng.gaussian();
    }
}

}  // namespace

Grid ddpm_sample(const NoisePredictor& model, const NoiseSchedule& sched, Rng& rng) {
    check_model_schedule(model, sched);
    Grid x = gaussian_sample(rng, model.image_shape());
    for (int t = sched.T; t >= 1; --t) ancestral_step(model, x, t, sched, rng);
    return clamp01(std::move(x));
}

Grid img2img(const NoisePredictor& model, const Grid& x0, double strength, const NoiseSchedule& sched, Rng& rng) {
    require(strength > 0.0 && strength <= 1.0, ErrorCode::invalid_argument, "img2img: strength must lie in (0, 1]");
    check_model_schedule(model, sched);
    const int t_start = static_cast<int>(std::lround(strength * sched.T));
    if (t_start == 0) return clamp01(x0);
    Grid x = forward_diffuse(x0, t_start, gaussian_sample(rng, x0.shape()), sched);
    for (int t = t_start; t >= 1; --t) ancestral_step(model, x, t, sched, rng);
    return clamp01(std::move(x));
}

Grid inpaint(const NoisePredictor& model, const Grid& x0, const Grid& mask, const NoiseSchedule& sched, Rng& rng) {
    require_same_shape(x0, mask, "inpaint mask");
    check_model_schedule(model, sched);
    bool any_known = false;
    for (double m : mask.values()) {
        require(m == 0.0 || m == 1.0, ErrorCode::invalid_argument, "inpaint: mask must be binary");
        any_known = any_known || m == 0.0;
    }
    Grid x = gaussian_sample(rng, x0.shape());
    for (int t = sched.T; t >= 1; --t) {
        if (any_known) {
            const Grid known = forward_diffuse(x0, t, gaussian_sample(rng, x0.shape()), sched);
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (mask[i] == 0.0) x[i] = known[i];
            }
        }
        ancestral_step(model, x, t, sched, rng);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (mask[i] == 0.0) x[i] = x0[i];
    }
    return clamp01(std::move(x));
}

DdimForward ddim_forward_mean(const NoisePredictor& model, const Grid& x_t, int t, const NoiseSchedule& sched) {
    require(t >= 1 && t < sched.T, ErrorCode::invalid_argument, "ddim_forward_mean: need 1 <= t < T");
    const Grid eps = predict_noise(model, x_t, t);
    const double a = sched.alpha(t);
    const double an = sched.alpha(t + 1);
    DdimForward out{Grid(x_t.shape()), Grid(x_t.shape())};
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double f = (x_t[i] - std::sqrt(1.0 - a) * eps[i]) / std::sqrt(a);
        out.f_theta[i] = f;
        out.mean[i] = std::sqrt(an) * f + std::sqrt(1.0 - an) * eps[i];
    }
    return out;
}

double coefficient_ct(double alpha_t, double alpha_next) {
    return std::sqrt(1.0 - alpha_t) * std::sqrt(alpha_next) / std::sqrt(alpha_t) + std::sqrt(1.0 - alpha_next);
}

double coefficient_ct(int t, const NoiseSchedule& sched) {
    require(t >= 1 && t < sched.T, ErrorCode::invalid_argument, "coefficient_ct: need 1 <= t < T");
    return coefficient_ct(sched.alpha(t), sched.alpha(t + 1));
}

std::pair<double, double> dropped_coefficients(int t, const NoiseSchedule& sched) {
    require(t >= 1 && t < sched.T, ErrorCode::invalid_argument, "dropped_coefficients: need 1 <= t < T");
    const double a = sched.alpha(t);
    const double an = sched.alpha(t + 1);
    return {std::sqrt(1.0 - an / a), std::sqrt((1.0 - a) * an / a) - std::sqrt(1.0 - an)};
}

}  // namespace cgidm
