// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/inversion.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "cgidm/error.hpp"

namespace cgidm {

namespace {

struct LossAndGrad {
    double loss;
    Grid grad;  // w.r.t. x_t
};

// ||eps - model(x_t, t)||^2 and its gradient w.r.t. x_t.
LossAndGrad noise_loss_at(const NoisePredictor& model, const Grid& x_t, int t, const Grid& eps) {
    detail::Activations act;
    detail::forward(model, x_t, t, act);
    std::vector<double> upstream(act.output.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        const double d = act.output[i] - eps[i];
        loss += d * d;
        upstream[i] = 2.0 * d;
    }
    LossAndGrad out{loss, Grid()};
    detail::backpropagate(model, act, upstream, nullptr, ParamSelection::all, &out.grad);
    return out;
}

void check_pair(const NoisePredictor& theta, const NoisePredictor& theta_prime) {
    require(theta.image_shape() == theta_prime.image_shape() && theta.config().T == theta_prime.config().T,
            ErrorCode::shape_mismatch, "pretrained and fine-tuned models disagree on shape or T");
}

}  // namespace

double l_tar(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x, int t, const Grid& eps,
             const NoiseSchedule& sched) {
    check_pair(theta, theta_prime);
    require(t >= 1 && t <= sched.T, ErrorCode::invalid_argument, "l_tar: t out of range");
    const Grid x_t = forward_diffuse(x, t, eps, sched);
    const double pre = squared_distance(eps.values(), predict_noise(theta, x_t, t).values());
    const double fine = squared_distance(eps.values(), predict_noise(theta_prime, x_t, t).values());
    return pre - fine;
}

Grid noise_loss_grad(const NoisePredictor& model, const Grid& x, int t, const Grid& eps, const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T, ErrorCode::invalid_argument, "noise_loss_grad: t out of range");
    const Grid x_t = forward_diffuse(x, t, eps, sched);
    Grid g = noise_loss_at(model, x_t, t, eps).grad;
    const double sa = std::sqrt(sched.alpha(t));
    for (auto& v : g.values()) v *= sa;
    return g;
}

Grid l_tar_grad(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x, int t, const Grid& eps,
                const NoiseSchedule& sched) {
    check_pair(theta, theta_prime);
    return noise_loss_grad(theta, x, t, eps, sched) - noise_loss_grad(theta_prime, x, t, eps, sched);
}

Grid project_to_ball(const Grid& center, const Grid& point, double radius) {
    require_same_shape(center, point, "project_to_ball");
    require(radius > 0.0, ErrorCode::invalid_argument, "project_to_ball: radius must be positive");
    const double dist = l2_distance(point, center);
    if (dist <= radius) return point;
    const double s = radius / dist;
    Grid out(center.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = center[i] + s * (point[i] - center[i]);
    return out;
}

namespace {

struct StepEval {
    double objective;
    Grid ascent;  // direction to move along (before normalization)
};

using Objective = std::function<StepEval(const Grid& x, int t, const Grid& eps)>;

void validate(const InversionConfig& cfg, const NoiseSchedule& sched, int& t_lo, int& t_hi) {
    require(cfg.steps >= 1, ErrorCode::invalid_argument, "inversion: steps must be >= 1");
    require(cfg.step_len > 0.0 && cfg.budget > 0.0, ErrorCode::invalid_argument,
            "inversion: step length and budget must be positive");
    t_lo = cfg.t_lo;
    t_hi = cfg.t_hi == 0 ? sched.T : cfg.t_hi;
    if (cfg.keep_ct_coefficients) t_hi = std::min(t_hi, sched.T - 1);
    require(1 <= t_lo && t_lo <= t_hi && t_hi <= sched.T, ErrorCode::invalid_argument,
            "inversion: need 1 <= t_lo <= t_hi <= T");
}

// Projected normalized-gradient ascent shared by every inversion variant.
InversionResult pgd_loop(const Grid& start, const InversionConfig& cfg, const NoiseSchedule& sched,
                         const Objective& objective) {
    int t_lo = 0, t_hi = 0;
    validate(cfg, sched, t_lo, t_hi);
    Rng rng(cfg.seed);
    InversionResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.steps));
    Grid x = start;
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = uniform_timestep(rng, t_lo, t_hi);
        const Grid eps = gaussian_sample(rng, x.shape());
        StepEval ev = objective(x, t, eps);
        if (cfg.keep_ct_coefficients) {
            const double c = coefficient_ct(t, sched);
            ev.objective *= c * c;
            for (auto& v : ev.ascent.values()) v *= c * c;
        }
        require_finite(ev.ascent.values(), "inversion gradient");
        if (!std::isfinite(ev.objective)) fail(ErrorCode::numerical, "inversion objective is not finite");

        TraceRow row{i + 1, t, ev.objective, 0.0, false};
        const double gnorm = l2_norm(ev.ascent);
        if (gnorm == 0.0) {
            row.skipped = true;
        } else {
            Grid next = x;
            axpy(cfg.step_len / gnorm, ev.ascent.values(), next.values());
            x = project_to_ball(start, next, cfg.budget);
        }
        row.drift = l2_distance(x, start);
        result.trace.push_back(row);
    }
    result.image = x;
    return result;
}

}  // namespace

InversionResult cgi_dm(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x_bar,
                       const InversionConfig& cfg, const NoiseSchedule& sched) {
    check_pair(theta, theta_prime);
    require(x_bar.shape() == theta.image_shape(), ErrorCode::shape_mismatch, "cgi_dm: image shape vs model");
    auto result = pgd_loop(x_bar, cfg, sched, [&](const Grid& x, int t, const Grid& eps) {
        const Grid x_t = forward_diffuse(x, t, eps, sched);
        auto pre = noise_loss_at(theta, x_t, t, eps);
        auto fine = noise_loss_at(theta_prime, x_t, t, eps);
        StepEval ev{pre.loss - fine.loss, pre.grad - fine.grad};
        const double sa = std::sqrt(sched.alpha(t));
        for (auto& v : ev.ascent.values()) v *= sa;
        return ev;
    });
    result.image = clamp01(std::move(result.image));
    return result;
}

InversionResult direct_gi(const NoisePredictor& theta_prime, const Grid& x_bar, const InversionConfig& cfg,
                          const NoiseSchedule& sched) {
    require(x_bar.shape() == theta_prime.image_shape(), ErrorCode::shape_mismatch, "direct_gi: image shape vs model");
    auto result = pgd_loop(x_bar, cfg, sched, [&](const Grid& x, int t, const Grid& eps) {
        const Grid x_t = forward_diffuse(x, t, eps, sched);
        auto fine = noise_loss_at(theta_prime, x_t, t, eps);
        // descent on the loss
        const double sa = -std::sqrt(sched.alpha(t));
        for (auto& v : fine.grad.values()) v *= sa;
        return StepEval{fine.loss, std::move(fine.grad)};
    });
    result.image = clamp01(std::move(result.image));
    return result;
}

InversionResult cgi_dm_latent(const NoisePredictor& theta, const NoisePredictor& theta_prime, const AutoEncoder& ae,
                              const Grid& x_bar, const InversionConfig& cfg, const NoiseSchedule& sched) {
    check_pair(theta, theta_prime);
    if (theta.image_shape() != ae.latent_shape()) {
        fail(ErrorCode::shape_mismatch, "cgi_dm_latent: model works on " + shape_string(theta.image_shape()) +
                                            " but the autoencoder latent is " + shape_string(ae.latent_shape()));
    }
    const Grid z_bar = ae.encode(x_bar);
    auto result = pgd_loop(z_bar, cfg, sched, [&](const Grid& z, int t, const Grid& eps) {
        const Grid z_t = forward_diffuse(z, t, eps, sched);
        auto pre = noise_loss_at(theta, z_t, t, eps);
        auto fine = noise_loss_at(theta_prime, z_t, t, eps);
        StepEval ev{pre.loss - fine.loss, pre.grad - fine.grad};
        const double sa = std::sqrt(sched.alpha(t));
        for (auto& v : ev.ascent.values()) v *= sa;
        return ev;
    });
    result.image = ae.decode(result.image);
    return result;
}

double isotropic_log_density(const Grid& x, const Grid& mu, double sigma) {
    require_same_shape(x, mu, "isotropic_log_density");
    require(sigma > 0.0, ErrorCode::invalid_argument, "isotropic_log_density: sigma must be positive");
    const double n = static_cast<double>(x.size());
    return -0.5 * squared_distance(x.values(), mu.values()) / (sigma * sigma) -
           n * std::log(sigma) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace cgidm
