// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cgidm/defense.hpp"
#include "cgidm/grid.hpp"
#include "cgidm/net.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

/// Arrays are indexed by timestep. alpha_cum is the cumulative product
/// prod_{s<=t}(1 - beta_s) with alpha_cum[0] = 1; beta[0] is unused.
/// sigma2[t] = beta[t+1] is the forward-DDIM transition variance, t < T.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_cum;
    std::vector<double> sigma2;

    /// Schedule from explicit betas beta_1..beta_T, each in (0, 1).
    static NoiseSchedule from_betas(const std::vector<double>& betas);

    double alpha(int t) const;
};

/// Linear betas from beta_min to beta_max. Requires T >= 2.
NoiseSchedule build_schedule(int T, double beta_min, double beta_max);

/// sqrt(alpha_t) x0 + sqrt(1 - alpha_t) eps. t = 0 is the identity slot.
Grid forward_diffuse(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& sched);

/// || eps - eps_theta(forward_diffuse(x0, t, eps), t) ||^2 (sum of squares).
double ddpm_loss(const NoisePredictor& model, const Grid& x0, int t, const Grid& eps, const NoiseSchedule& sched);

/// Mean ddpm_loss over `draws` (t, eps) samples per image.
double mean_ddpm_loss(const NoisePredictor& model, std::span<const Grid> images, const NoiseSchedule& sched,
                      int draws, std::uint64_t seed);

struct TrainConfig {
    NetConfig net;
    int steps = 4000;
    std::size_t batch = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct LossPoint {
    int step;
    double loss;
};

using LossLog = std::vector<LossPoint>;

/// Adam on ddpm_loss with (image, t, eps) drawn per batch element.
NoisePredictor pretrain(std::span<const Grid> dataset, const NoiseSchedule& sched, const TrainConfig& config,
                        LossLog* log = nullptr);

enum class FinetuneMode { full_no_prior, full_with_prior, lora };

struct FinetuneSpec {
    FinetuneMode mode = FinetuneMode::full_no_prior;
    int steps_per_image = 50;
    double learning_rate = 1e-4;
    std::size_t batch = 4;
    double prior_weight = 1.0;
    /// Class images sampled from the pretrained model; unset means 50 x members.
    std::optional<std::size_t> prior_set_size;
    std::vector<DefenseKind> augmentations;
    std::size_t lora_rank = 4;
    double lora_scale = 1.0;
};

/// Continue training from `pretrained`.
///   full_no_prior:   member loss only.
///   full_with_prior: member loss + prior_weight * loss on class images drawn
///                    from the pretrained model before any update. Callers may
///                    pass `class_images` to skip sampling.
///   lora:            base frozen, adapters trained.
/// Augmentations alter the training view of each member draw only.
NoisePredictor finetune(const NoisePredictor& pretrained, std::span<const Grid> members, const FinetuneSpec& spec,
                        const NoiseSchedule& sched, Rng& rng, LossLog* log = nullptr,
                        std::span<const Grid> class_images = {});

/// Ancestral DDPM sampling from x_T ~ N(0, I); output clamped to [0, 1].
Grid ddpm_sample(const NoisePredictor& model, const NoiseSchedule& sched, Rng& rng);

/// Diffuse x0 to t* = round(strength * T) and denoise back to 0.
Grid img2img(const NoisePredictor& model, const Grid& x0, double strength, const NoiseSchedule& sched, Rng& rng);

/// Masked resampling. `mask` is 1 where pixels are unknown and 0 where x0 is
/// kept; known pixels are replaced by forward-diffused x0 at every step.
Grid inpaint(const NoisePredictor& model, const Grid& x0, const Grid& mask, const NoiseSchedule& sched, Rng& rng);

struct DdimForward {
    Grid mean;
    Grid f_theta;  // predicted x0
};

/// Model-predicted mean of p(x_{t+1} | x_t) built from the predicted x0.
DdimForward ddim_forward_mean(const NoisePredictor& model, const Grid& x_t, int t, const NoiseSchedule& sched);

/// c_t = sqrt(1 - a_t) sqrt(a_{t+1}) / sqrt(a_t) + sqrt(1 - a_{t+1}).
double coefficient_ct(double alpha_t, double alpha_next);
double coefficient_ct(int t, const NoiseSchedule& sched);

/// The two coefficients dropped when the forward-DDIM residual is reduced to
/// c_t * (eps - eps_theta): sqrt(1 - a_{t+1}/a_t) and
/// sqrt((1 - a_t) a_{t+1}/a_t) - sqrt(1 - a_{t+1}).
std::pair<double, double> dropped_coefficients(int t, const NoiseSchedule& sched);

}  // namespace cgidm
