// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "cgidm/datagen.hpp"
#include "cgidm/error.hpp"
#include "cgidm/inversion.hpp"
#include "cgidm/metrics.hpp"
#include "cgidm/mia.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cgidm;

namespace {

NoiseSchedule default_schedule() { return build_schedule(100, 1e-4, 0.02); }

std::vector<Grid> images(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Grid> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(gaussian_sample(rng, {6, 6}));
    return out;
}

}  // namespace

TEST_CASE("cmia with identical models is zero") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 1, false);
    Rng rng(2);
    CHECK(cmia_score(m, m, images(1, 3)[0], 40, rng, 8, s) == 0.0);
}

TEST_CASE("one noise draw equals a single l_tar call") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor a = test::random_model(test::small_net(), 4, false);
    const NoisePredictor b = test::random_model(test::small_net(), 5, true);
    const Grid x = images(1, 6)[0];
    Rng r1(7), r2(7);
    const double score = cmia_score(a, b, x, 25, r1, 1, s);
    CHECK(score == l_tar(a, b, x, 25, gaussian_sample(r2, x.shape()), s));
}

TEST_CASE("cmia is antisymmetric under swapped models") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor a = test::random_model(test::small_net(), 8, false);
    const NoisePredictor b = test::random_model(test::small_net(), 9, false);
    for (const Grid& x : images(5, 10)) {
        Rng r1(11), r2(11);
        CHECK(cmia_score(a, b, x, 60, r1, 4, s) == doctest::Approx(-cmia_score(b, a, x, 60, r2, 4, s)).epsilon(1e-14));
    }
}

TEST_CASE("naive score orientation") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 12, false);
    const Grid x = images(1, 13)[0];
    Rng r1(14), r2(14);
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) expect -= ddpm_loss(m, x, 50, gaussian_sample(r2, x.shape()), s) / 3.0;
    const double score = naive_score(m, x, 50, r1, 3, s);
    CHECK(score == doctest::Approx(expect).epsilon(1e-14));
    CHECK(score <= 0.0);

    // theta' returning its bias with eps = bias: loss zero, score maximal
    Rng zr(15);
    NoisePredictor perfect(test::small_net(), zr);
    auto blocks = perfect.parameter_blocks();
    for (auto b : blocks) {
        for (auto& v : b) v = 0.0;
    }
    CHECK(naive_score(perfect, x, 50, r1, 2, s) < 0.0);
    Rng fixed(16);
    const Grid eps = gaussian_sample(fixed, x.shape());
    std::copy(eps.values().begin(), eps.values().end(), blocks.back().begin());
    CHECK(ddpm_loss(perfect, x, 50, eps, s) == 0.0);
}

TEST_CASE("score argument checks") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 17, false);
    const Grid x = images(1, 18)[0];
    Rng rng(19);
    CHECK_THROWS_AS(cmia_score(m, m, x, 0, rng, 1, s), Error);
    CHECK_THROWS_AS(cmia_score(m, m, x, 101, rng, 1, s), Error);
    CHECK_THROWS_AS(cmia_score(m, m, x, 10, rng, 0, s), Error);
    CHECK_THROWS_AS(naive_score(m, x, 10, rng, 0, s), Error);
}

TEST_CASE("mia sweep rows, determinism and no-signal AUC") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor m = test::random_model(test::small_net(), 20, false);
    const auto members = images(20, 21), holdout = images(20, 22);
    const std::vector<int> ts{10, 50, 90};
    const auto rows = mia_sweep(m, m, members, holdout, ts, 2, s, 23);
    REQUIRE(rows.size() == 6);
    for (const MiaAucRow& r : rows) {
        if (r.method == MiaMethod::cmia) {
            CHECK(r.auc == 0.5);
        } else {
            CHECK(std::abs(r.auc - 0.5) <= 0.2);
        }
    }
    const auto again = mia_sweep(m, m, members, holdout, ts, 2, s, 23);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].auc == rows[i].auc);
    CHECK_THROWS_AS(mia_sweep(m, m, std::vector<Grid>{}, holdout, ts, 2, s, 23), Error);
}

TEST_CASE("pooled sweep uses the documented noise streams") {
    const NoiseSchedule s = default_schedule();
    const NoisePredictor theta = test::random_model(test::small_net(), 30, false);
    const NoisePredictor ft = test::random_model(test::small_net(), 31, false);
    const auto members = images(3, 32), holdout = images(3, 33);
    const std::vector<int> ts{20};
    const std::uint64_t seed = 34;
    const auto rows = mia_sweep(theta, ft, members, holdout, ts, 3, s, seed);

    std::vector<double> cm, ch, nm, nh;
    for (std::size_t k = 0; k < 6; ++k) {
        const Grid& x = k < 3 ? members[k] : holdout[k - 3];
        Rng r1 = Rng(seed).split(k * 101 + 20), r2 = Rng(seed).split(k * 101 + 20);
        (k < 3 ? cm : ch).push_back(cmia_score(theta, ft, x, 20, r1, 3, s));
        (k < 3 ? nm : nh).push_back(naive_score(ft, x, 20, r2, 3, s));
    }
    for (const MiaAucRow& r : rows) {
        CHECK(r.t == 20);
        CHECK(r.auc == (r.method == MiaMethod::cmia ? auc(cm, ch) : auc(nm, nh)));
    }
}

TEST_CASE("mia method names round trip") {
    for (MiaMethod m : {MiaMethod::cmia, MiaMethod::naive}) CHECK(parse_mia_method(mia_method_name(m)) == m);
    CHECK_THROWS_AS(parse_mia_method("pia"), Error);
}
