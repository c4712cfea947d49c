// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/mia.hpp"

#include <cmath>

#include "cgidm/error.hpp"
#include "cgidm/inversion.hpp"
#include "cgidm/metrics.hpp"

namespace cgidm {

std::string mia_method_name(MiaMethod m) { return m == MiaMethod::cmia ? "cmia" : "naive"; }

MiaMethod parse_mia_method(const std::string& name) {
    if (name == "cmia") return MiaMethod::cmia;
    if (name == "naive") return MiaMethod::naive;
    fail(ErrorCode::invalid_argument, "unknown MIA method '" + name + "'");
}

namespace {

void check_args(int t, int n_noise, const NoiseSchedule& sched) {
    require(t >= 1 && t <= sched.T, ErrorCode::invalid_argument, "mia: t out of range");
    require(n_noise >= 1, ErrorCode::invalid_argument, "mia: n_noise must be >= 1");
}

double checked(double score) {
    require(std::isfinite(score), ErrorCode::numerical, "mia: non-finite score");
    return score;
}

}  // namespace

double cmia_score(const NoisePredictor& theta, const NoisePredictor& theta_prime, const Grid& x0, int t, Rng& rng,
                  int n_noise, const NoiseSchedule& sched) {
    check_args(t, n_noise, sched);
    double sum = 0.0;
    for (int i = 0; i < n_noise; ++i) {
        const Grid eps = gaussian_sample(rng, x0.shape());
        sum += l_tar(theta, theta_prime, x0, t, eps, sched);
    }
    return checked(sum / n_noise);
}

double naive_score(const NoisePredictor& theta_prime, const Grid& x0, int t, Rng& rng, int n_noise,
                   const NoiseSchedule& sched) {
    check_args(t, n_noise, sched);
    double sum = 0.0;
    for (int i = 0; i < n_noise; ++i) {
        const Grid eps = gaussian_sample(rng, x0.shape());
        sum += ddpm_loss(theta_prime, x0, t, eps, sched);
    }
    return checked(-sum / n_noise);
}

std::vector<MiaAucRow> mia_sweep_pooled(const NoisePredictor& theta, std::span<const MiaGroup> groups,
                                        const std::vector<int>& t_list, int n_noise, const NoiseSchedule& sched,
                                        std::uint64_t seed) {
    require(!groups.empty(), ErrorCode::invalid_argument, "mia_sweep: no groups");
    require(!t_list.empty(), ErrorCode::invalid_argument, "mia_sweep: empty t list");
    for (const auto& g : groups) {
        require(g.theta_prime != nullptr, ErrorCode::invalid_argument, "mia_sweep: null model");
        require(!g.members.empty() && !g.holdout.empty(), ErrorCode::invalid_argument, "mia_sweep: empty image set");
    }
    const Rng root(seed);
    const auto stride = static_cast<std::uint64_t>(sched.T + 1);
    std::vector<MiaAucRow> rows;
    for (MiaMethod method : {MiaMethod::cmia, MiaMethod::naive}) {
        for (int t : t_list) {
            std::vector<double> mem, hol;
            std::uint64_t k = 0;
            for (const auto& g : groups) {
                for (std::size_t i = 0; i < g.members.size() + g.holdout.size(); ++i, ++k) {
                    const bool is_member = i < g.members.size();
                    const Grid& x0 = is_member ? g.members[i] : g.holdout[i - g.members.size()];
                    Rng rng = root.split(k * stride + static_cast<std::uint64_t>(t));
                    const double s = method == MiaMethod::cmia
                                         ? cmia_score(theta, *g.theta_prime, x0, t, rng, n_noise, sched)
                                         : naive_score(*g.theta_prime, x0, t, rng, n_noise, sched);
                    (is_member ? mem : hol).push_back(s);
                }
            }
            rows.push_back({method, t, auc(mem, hol)});
        }
    }
    return rows;
}

std::vector<MiaAucRow> mia_sweep(const NoisePredictor& theta, const NoisePredictor& theta_prime,
                                 std::span<const Grid> members, std::span<const Grid> holdout,
                                 const std::vector<int>& t_list, int n_noise, const NoiseSchedule& sched,
                                 std::uint64_t seed) {
    const MiaGroup group{&theta_prime, members, holdout};
    return mia_sweep_pooled(theta, std::span<const MiaGroup>(&group, 1), t_list, n_noise, sched, seed);
}

}  // namespace cgidm
