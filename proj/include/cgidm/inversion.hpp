// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cgidm/diffusion.hpp"
#include "cgidm/grid.hpp"
#include "cgidm/net.hpp"

namespace cgidm {

struct InversionConfig {
    int steps = 1000;          // Monte-Carlo / PGD iterations
    double step_len = 2.0;     // L2 length of each step
    double budget = 70.0;      // L2 radius around the starting image
    int t_lo = 1;
    int t_hi = 0;              // 0 means T
    std::uint64_t seed = 0;
    /// Weight each sampled loss difference by c_t^2. Only t < T is sampled then.
    bool keep_ct_coefficients = false;
};

struct TraceRow {
    int step = 0;
    int t = 0;
    double objective = 0.0;  // objective at the iterate the gradient was taken at
    double drift = 0.0;      // ||x^(i+1) - x_bar||_2 after the update
    bool skipped = false;    // zero gradient, no movement
};

struct InversionResult {
    Grid image;  // final iterate clamped to [0, 1]
    std::vector<TraceRow> trace;
};

/// ||eps - eps_theta(x_t, t)||^2 - ||eps - eps_theta'(x_t, t)||^2 with
/// x_t = sqrt(a_t) x + sqrt(1 - a_t) eps.
double l_tar(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x, int t, const Grid& eps,
             const NoiseSchedule& sched);

/// Gradient of l_tar w.r.t. x (chain rule through the forward diffusion).
Grid l_tar_grad(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x, int t, const Grid& eps,
                const NoiseSchedule& sched);

/// Gradient of ||eps - eps_theta(x_t, t)||^2 w.r.t. x.
Grid noise_loss_grad(const NoisePredictor& model, const Grid& x, int t, const Grid& eps, const NoiseSchedule& sched);

/// Radial rescaling of `point` onto the L2 ball of `radius` around `center`.
Grid project_to_ball(const Grid& center, const Grid& point, double radius);

/// Contrasting gradient inversion: normalized-gradient ascent on l_tar with
/// (t, eps) resampled every step, projected onto the budget ball around x_bar.
InversionResult cgi_dm(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x_bar,
                       const InversionConfig& cfg, const NoiseSchedule& sched);

/// Control: same loop, single model, descending ||eps - eps_theta'||^2.
InversionResult direct_gi(const NoisePredictor& theta_prime, const Grid& x_bar, const InversionConfig& cfg,
                          const NoiseSchedule& sched);

/// cgi_dm in the autoencoder's latent space; budget and steps are measured on
/// latents; the decoded final latent is returned. Trace norms are latent norms.
InversionResult cgi_dm_latent(const NoisePredictor& theta, const NoisePredictor& theta_prime, const AutoEncoder& ae,
                              const Grid& x_bar, const InversionConfig& cfg, const NoiseSchedule& sched);

/// log N(x; mu, sigma^2 I).
double isotropic_log_density(const Grid& x, const Grid& mu, double sigma);

}  // namespace cgidm
