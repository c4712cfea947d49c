// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "cgidm/diffusion.hpp"
#include "cgidm/grid.hpp"
#include "cgidm/net.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

/// Higher scores mean "member" for every method.
enum class MiaMethod { cmia, naive };

std::string mia_method_name(MiaMethod m);
MiaMethod parse_mia_method(const std::string& name);

struct MiaScore {
    int image = 0;
    int t = 0;
    double score = 0.0;
    MiaMethod method = MiaMethod::cmia;
};

/// Mean l_tar(theta, theta_prime, x0, t, eps) over n_noise draws of eps.
double cmia_score(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x0, int t, Rng& rng,
                  int n_noise, const NoiseSchedule& sched);

/// Negated mean ||eps - eps_theta'(x_t, t)||^2 over n_noise draws.
double naive_score(const NoisePredictor& theta_prime, const Grid& x0, int t, Rng& rng, int n_noise,
                   const NoiseSchedule& sched);

struct MiaAucRow {
    MiaMethod method = MiaMethod::cmia;
    int t = 0;
    double auc = 0.5;
};

/// Images scored against one fine-tuned model.
struct MiaGroup {
    const NoisePredictor* theta_prime = nullptr;
    std::span<const Grid> members;
    std::span<const Grid> holdout;
};

/// AUC of both methods at every t, pooling the scores of all groups. The
/// k-th scored image (groups in order, members before holdout) draws its
/// noise from Rng(seed).split(k * (T + 1) + t), so both methods see the same
/// noise for a given (image, t).
std::vector<MiaAucRow> mia_sweep_pooled(const NoisePredictor& theta, std::span<const MiaGroup> groups,
                                        const std::vector<int>& t_list, int n_noise, const NoiseSchedule& sched,
                                        std::uint64_t seed);

/// mia_sweep_pooled with a single group.
std::vector<MiaAucRow> mia_sweep(const NoisePredictor& theta, const NoisePredictor& theta_prime,
                                 std::span<const Grid> members, std::span<const Grid> holdout,
                                 const std::vector<int>& t_list, int n_noise, const NoiseSchedule& sched,
                                 std::uint64_t seed);

}  // namespace cgidm
