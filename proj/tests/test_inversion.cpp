// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <vector>

#include "cgidm/error.hpp"
#include "cgidm/inversion.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cgidm;

namespace {

NoiseSchedule default_schedule() { return build_schedule(100, 1e-4, 0.02); }

Grid mid_image(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    Grid g(shape);
    for (auto& v : g.values()) v = rng.uniform(0.3, 0.7);
    return g;
}

// Single affine layer: eps_theta(x_t, t) = W [x_t; emb(t)] + b, plus the skip term.
NetConfig linear_net(double skip) {
    NetConfig c;
    c.rows = 3;
    c.cols = 3;
    c.hidden = {};
    c.time_embed_dim = 4;
    c.T = 10;
    c.beta_min = 0.01;
    c.beta_max = 0.2;
    c.skip_std = skip;
    return c;
}

}  // namespace

TEST_CASE("l_tar examples") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 1, true);
    Rng rng(2);
    const Grid x = gaussian_sample(rng, m.image_shape());
    const Grid eps = gaussian_sample(rng, m.image_shape());
    CHECK(l_tar(m, m, x, 30, eps, s) == 0.0);

    // theta' outputs its bias only, and eps equals that bias: a perfect predictor.
    Rng zr(3);
    const NoisePredictor zero(test::small_net(), zr);
    NoisePredictor perfect = zero;
    auto blocks = perfect.parameter_blocks();
    for (auto b : blocks) {
        for (auto& v : b) v = 0.0;
    }
    auto out_bias = blocks.back();
    REQUIRE(out_bias.size() == 36);
    Grid target(m.image_shape());
    for (std::size_t i = 0; i < 36; ++i) out_bias[i] = target[i] = rng.gaussian();
    CHECK(l_tar(zero, perfect, x, 30, target, s) == doctest::Approx(l2_norm(target) * l2_norm(target)).epsilon(1e-14));

    CHECK_THROWS_AS(l_tar(m, m, x, 0, eps, s), Error);
    CHECK_THROWS_AS(l_tar(m, m, x, 101, eps, s), Error);
}

TEST_CASE("l_tar gradient matches central differences") {
    const NoiseSchedule s = default_schedule();
    Rng rng(10);
    for (int pair = 0; pair < 5; ++pair) {
        NetConfig c = test::small_net();
        c.skip_std = pair % 2 == 0 ? 0.0 : 0.21;
        const NoisePredictor theta = test::random_model(c, 200 + static_cast<std::uint64_t>(pair), false);
        const NoisePredictor theta_p = test::random_model(c, 300 + static_cast<std::uint64_t>(pair), pair >= 3);
        const Grid x = gaussian_sample(rng, theta.image_shape());
        const Grid eps = gaussian_sample(rng, theta.image_shape());
        const int t = uniform_timestep(rng, 1, s.T);
        const Grid g = l_tar_grad(theta, theta_p, x, t, eps, s);
        for (int k = 0; k < 10; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.size()) - 1));
            const double fd = test::central_difference([&](double h) {
                Grid xx = x;
                xx[i] += h;
                return l_tar(theta, theta_p, xx, t, eps, s);
            });
            CAPTURE(pair);
            CAPTURE(t);
            CHECK(test::rel_err(g[i], fd) < 1e-6);
        }
        const Grid split = noise_loss_grad(theta, x, t, eps, s) - noise_loss_grad(theta_p, x, t, eps, s);
        CHECK(split == g);
        CHECK(l2_norm(l_tar_grad(theta, theta, x, t, eps, s)) == 0.0);
    }
}

TEST_CASE("sampled gradients average to the analytic expectation") {
    // For affine predictors E_eps[l_tar] is quadratic in x with gradient
    // 2 s_t [A^T (s_t A x + b_t) - A'^T (s_t A' x + b'_t)], s_t = sqrt(alpha_t).
    const NoiseSchedule s = build_schedule(10, 0.01, 0.2);
    const NoisePredictor theta = test::random_model(linear_net(0.3), 5, false);
    const NoisePredictor theta_p = test::random_model(linear_net(0.3), 6, false);
    const std::size_t d = 9;
    const Grid x = mid_image({3, 3}, 7);

    Grid expect({3, 3});
    for (int t = 1; t <= s.T; ++t) {
        const double st = std::sqrt(s.alpha(t));
        for (const auto* m : {&theta, &theta_p}) {
            const double sign = m == &theta ? 1.0 : -1.0;
            const Grid b = predict_noise(*m, Grid({3, 3}), t);
            std::vector<Grid> cols;
            for (std::size_t j = 0; j < d; ++j) {
                Grid e({3, 3});
                e[j] = 1.0;
                cols.push_back(predict_noise(*m, e, t) - b);
            }
            Grid r = b;  // s_t A x + b_t
            for (std::size_t j = 0; j < d; ++j) axpy(st * x[j], cols[j].values(), r.values());
            for (std::size_t j = 0; j < d; ++j) expect[j] += sign * 2.0 * st * dot(cols[j].values(), r.values()) / s.T;
        }
    }

    Rng rng(8);
    const int n = 10000;
    std::vector<double> sum(d, 0.0), sum2(d, 0.0);
    for (int k = 0; k < n; ++k) {
        const int t = uniform_timestep(rng, 1, s.T);
        const Grid g = l_tar_grad(theta, theta_p, x, t, gaussian_sample(rng, {3, 3}), s);
        for (std::size_t j = 0; j < d; ++j) {
            sum[j] += g[j];
            sum2[j] += g[j] * g[j];
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double m = sum[j] / n;
        const double se = std::sqrt((sum2[j] / n - m * m) / n);
        CAPTURE(j);
        CHECK(std::abs(m - expect[j]) < 3.0 * se);
    }
}

TEST_CASE("projection onto the budget ball") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const Grid c = gaussian_sample(rng, {4, 5});
        const Grid p = c + rng.uniform(0.1, 5.0) * gaussian_sample(rng, {4, 5});
        const double radius = rng.uniform(0.5, 3.0);
        const Grid once = project_to_ball(c, p, radius);
        const Grid twice = project_to_ball(c, once, radius);
        CHECK(l2_distance(once, c) <= radius + 1e-12);
        for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::abs(once[i] - twice[i]) <= 1e-12);
        if (l2_distance(p, c) <= radius) {
            CHECK(once == p);
        } else {
            CHECK(l2_distance(once, c) == doctest::Approx(radius).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(project_to_ball(Grid({2}), Grid({3}), 1.0), Error);
    CHECK_THROWS_AS(project_to_ball(Grid({2}), Grid({2}), 0.0), Error);
}

TEST_CASE("one cgi step moves exactly alpha along the normalized gradient") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor theta = test::random_model(test::small_net(), 40, false);
    const NoisePredictor theta_p = test::random_model(test::small_net(), 41, false);
    const Grid x_bar = mid_image(theta.image_shape(), 42);
    InversionConfig cfg;
    cfg.steps = 1;
    cfg.step_len = 0.01;
    cfg.budget = 1.0;
    cfg.seed = 43;
    const InversionResult r = cgi_dm(theta, theta_p, x_bar, cfg, s);

    Rng replay(43);
    const int t = uniform_timestep(replay, 1, s.T);
    const Grid eps = gaussian_sample(replay, x_bar.shape());
    const Grid g = l_tar_grad(theta, theta_p, x_bar, t, eps, s);
    const double gn = l2_norm(g);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].t == t);
    CHECK(r.trace[0].objective == doctest::Approx(l_tar(theta, theta_p, x_bar, t, eps, s)).epsilon(1e-12));
    CHECK(r.trace[0].drift == doctest::Approx(0.01).epsilon(1e-12));
    for (std::size_t i = 0; i < x_bar.size(); ++i) {
        CHECK(r.image[i] - x_bar[i] == doctest::Approx(0.01 * g[i] / gn).epsilon(1e-9));
    }
}

TEST_CASE("every iterate of a full inversion stays inside the budget") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor theta = test::random_model(test::small_net(), 50, false);
    const NoisePredictor theta_p = test::random_model(test::small_net(), 51, true);
    const Grid x_bar = mid_image(theta.image_shape(), 52);
    InversionConfig cfg;
    cfg.budget = 0.35;
    cfg.step_len = cfg.budget * 2.0 / 70.0;
    cfg.seed = 53;
    for (bool direct : {false, true}) {
        const InversionResult r = direct ? direct_gi(theta_p, x_bar, cfg, s) : cgi_dm(theta, theta_p, x_bar, cfg, s);
        REQUIRE(r.trace.size() == 1000);
        double peak = 0.0;
        for (const TraceRow& row : r.trace) {
            CHECK(row.drift <= cfg.budget + 1e-9);
            peak = std::max(peak, row.drift);
        }
        CHECK(peak == doctest::Approx(cfg.budget).epsilon(1e-9));
        for (double v : r.image.values()) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("inversion defaults mirror the step to budget ratio") {
    const InversionConfig cfg;
    CHECK(cfg.steps == 1000);
    CHECK(cfg.step_len / cfg.budget == doctest::Approx(2.0 / 70.0).epsilon(1e-15));
}

TEST_CASE("identical models give zero gradients and skipped steps") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 60, false);
    const Grid x_bar = mid_image(m.image_shape(), 61);
    InversionConfig cfg;
    cfg.steps = 25;
    cfg.budget = 1.0;
    cfg.step_len = 0.1;
    const InversionResult r = cgi_dm(m, m, x_bar, cfg, s);
    for (const TraceRow& row : r.trace) {
        CHECK(row.skipped);
        CHECK(row.drift == 0.0);
        CHECK(row.objective == 0.0);
    }
    CHECK(r.image == x_bar);
}

TEST_CASE("non-finite parameters abort the inversion") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor theta = test::random_model(test::small_net(), 62, false);
    NoisePredictor broken = theta;
    broken.parameter_blocks()[0][0] = std::numeric_limits<double>::quiet_NaN();
    InversionConfig cfg;
    cfg.steps = 3;
    CHECK_THROWS_AS(cgi_dm(theta, broken, mid_image(theta.image_shape(), 63), cfg, s), Error);
}

TEST_CASE("inversion config validation") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 64, false);
    const Grid x_bar = mid_image(m.image_shape(), 65);
    InversionConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(cgi_dm(m, m, x_bar, cfg, s), Error);
    cfg = InversionConfig{};
    cfg.budget = 0.0;
    CHECK_THROWS_AS(cgi_dm(m, m, x_bar, cfg, s), Error);
    cfg = InversionConfig{};
    cfg.t_lo = 50;
    cfg.t_hi = 40;
    CHECK_THROWS_AS(direct_gi(m, x_bar, cfg, s), Error);
    cfg = InversionConfig{};
    cfg.t_hi = 101;
    CHECK_THROWS_AS(cgi_dm(m, m, x_bar, cfg, s), Error);
    CHECK_THROWS_AS(cgi_dm(m, m, Grid::image(5, 5), InversionConfig{}, s), Error);
}

TEST_CASE("keeping c_t weights the objective and avoids t = T") {
    const NoiseSchedule s = build_schedule(10, 0.01, 0.2);
    NetConfig c = test::small_net();
    c.T = 10;
    c.beta_min = 0.01;
    c.beta_max = 0.2;
    const NoisePredictor theta = test::random_model(c, 70, false);
    const NoisePredictor theta_p = test::random_model(c, 71, false);
    const Grid x_bar = mid_image(theta.image_shape(), 72);
    InversionConfig cfg;
    cfg.steps = 200;
    cfg.budget = 0.5;
    cfg.step_len = 1e-9;
    cfg.keep_ct_coefficients = true;
    cfg.seed = 73;
    const InversionResult r = cgi_dm(theta, theta_p, x_bar, cfg, s);
    for (const TraceRow& row : r.trace) CHECK(row.t < s.T);

    Rng replay(73);
    const int t = uniform_timestep(replay, 1, s.T - 1);
    const Grid eps = gaussian_sample(replay, x_bar.shape());
    const double ct = coefficient_ct(t, s);
    CHECK(r.trace[0].objective == doctest::Approx(ct * ct * l_tar(theta, theta_p, x_bar, t, eps, s)).epsilon(1e-12));
}

TEST_CASE("direct inversion descends the single-model loss") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 80, false);
    const Grid x_bar = mid_image(m.image_shape(), 81);
    InversionConfig cfg;
    cfg.steps = 1;
    cfg.step_len = 1e-4;
    cfg.budget = 1.0;
    cfg.seed = 82;
    const InversionResult r = direct_gi(m, x_bar, cfg, s);
    Rng replay(82);
    const int t = uniform_timestep(replay, 1, s.T);
    const Grid eps = gaussian_sample(replay, x_bar.shape());
    CHECK(ddpm_loss(m, r.image, t, eps, s) < ddpm_loss(m, x_bar, t, eps, s));
    CHECK(r.trace[0].objective == doctest::Approx(ddpm_loss(m, x_bar, t, eps, s)).epsilon(1e-12));
}

TEST_CASE("latent variant with an identity autoencoder equals pixel cgi") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor theta = test::random_model(test::small_net(), 90, false);
    const NoisePredictor theta_p = test::random_model(test::small_net(), 91, true);
    const Grid x_bar = mid_image(theta.image_shape(), 92);
    InversionConfig cfg;
    cfg.steps = 200;
    cfg.budget = 0.3;
    cfg.step_len = 0.3 * 2.0 / 70.0;
    cfg.seed = 93;
    const InversionResult pix = cgi_dm(theta, theta_p, x_bar, cfg, s);
    const InversionResult lat = cgi_dm_latent(theta, theta_p, AutoEncoder::identity(x_bar.shape()), x_bar, cfg, s);
    CHECK(lat.image == pix.image);
    REQUIRE(lat.trace.size() == pix.trace.size());
    for (std::size_t i = 0; i < pix.trace.size(); ++i) {
        CHECK(lat.trace[i].drift == pix.trace[i].drift);
        CHECK(lat.trace[i].objective == pix.trace[i].objective);
        CHECK(lat.trace[i].drift <= cfg.budget + 1e-9);
    }
    Rng rng(94);
    const AutoEncoder ae({6, 6}, {3, 3}, rng);
    CHECK_THROWS_AS(cgi_dm_latent(theta, theta_p, ae, x_bar, cfg, s), Error);
}

TEST_CASE("equal-variance gaussian log-density difference") {
    Rng rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        const Shape shape{1 + static_cast<std::size_t>(rng.uniform_int(0, 7)), 3};
        const Grid mu1 = gaussian_sample(rng, shape), mu2 = gaussian_sample(rng, shape);
        const Grid x = gaussian_sample(rng, shape);
        const double sigma = rng.uniform(0.1, 3.0);
        const double lhs = isotropic_log_density(x, mu1, sigma) - isotropic_log_density(x, mu2, sigma);
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d1 += (x[i] - mu1[i]) * (x[i] - mu1[i]);
            d2 += (x[i] - mu2[i]) * (x[i] - mu2[i]);
        }
        const double rhs = (d2 - d1) / (2.0 * sigma * sigma);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
    }
    CHECK_THROWS_AS(isotropic_log_density(Grid({2}), Grid({2}), 0.0), Error);
}
