// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numbers>
#include <set>
#include <vector>

#include "cgidm/datagen.hpp"
#include "cgidm/error.hpp"
#include "cgidm/metrics.hpp"
#include "doctest.h"

using namespace cgidm;

namespace {

double mean_pairwise(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, bool same) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j) {
            sum += cosine_sim(a[i], b[j]);
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("style kind names round trip") {
    for (StyleKind k : {StyleKind::stripes, StyleKind::checker, StyleKind::radial, StyleKind::blobs}) {
        CHECK(parse_style_kind(style_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(parse_style_kind("plaid"), Error);
}

TEST_CASE("generated images lie in [0, 1] and are deterministic") {
    for (const StyleSpec& spec : default_styles(8, 3)) {
        Rng a(5), b(5);
        const auto imgs = gen_style(spec, 6, 32, a);
        CHECK(imgs == gen_style(spec, 6, 32, b));
        for (const Grid& g : imgs) {
            CHECK(g.shape() == Shape{32, 32});
            for (double v : g.values()) CHECK((v >= 0.0 && v <= 1.0));
        }
    }
    CHECK(default_styles(4, 9).size() == 4);
    CHECK(default_styles(4, 9)[2].kind == StyleKind::radial);
}

TEST_CASE("gen_style argument checks") {
    Rng rng(1);
    const StyleSpec spec;
    CHECK_THROWS_AS(gen_style(spec, 0, 32, rng), Error);
    CHECK_THROWS_AS(gen_style(spec, 2, 12, rng), Error);
    CHECK_THROWS_AS(gen_style(spec, 2, 0, rng), Error);
}

TEST_CASE("zero jitter gives identical images") {
    Rng rng(2);
    for (StyleKind k : {StyleKind::stripes, StyleKind::checker, StyleKind::radial, StyleKind::blobs}) {
        StyleSpec spec = random_style(k, rng);
        spec.jitter = StyleJitter{};
        const auto imgs = gen_style(spec, 4, 16, rng);
        for (const Grid& g : imgs) CHECK(g == imgs[0]);
    }
}

TEST_CASE("orthogonal stripe styles separate in feature space") {
    Rng rng(3);
    StyleSpec h = random_style(StyleKind::stripes, rng);
    StyleSpec v = h;
    h.orientation = 0.0;
    v.orientation = std::numbers::pi / 2.0;
    std::vector<std::vector<double>> fh, fv;
    for (const Grid& g : gen_style(h, 10, 32, rng)) fh.push_back(feature_embed(g));
    for (const Grid& g : gen_style(v, 10, 32, rng)) fv.push_back(feature_embed(g));
    const double within = 0.5 * (mean_pairwise(fh, fh, true) + mean_pairwise(fv, fv, true));
    CHECK(mean_pairwise(fh, fv, false) < within);
}

TEST_CASE("default styles: within-style similarity beats cross-style by 0.1") {
    const auto specs = default_styles(5, 11);
    Rng rng(12);
    std::vector<std::vector<std::vector<double>>> feats;
    for (const StyleSpec& s : specs) {
        auto& f = feats.emplace_back();
        for (const Grid& g : gen_style(s, 20, 32, rng)) f.push_back(feature_embed(g));
    }
    double within = 0.0, cross = 0.0;
    int nw = 0, nc = 0;
    for (std::size_t a = 0; a < feats.size(); ++a) {
        within += mean_pairwise(feats[a], feats[a], true);
        ++nw;
        for (std::size_t b = a + 1; b < feats.size(); ++b) {
            cross += mean_pairwise(feats[a], feats[b], false);
            ++nc;
        }
    }
    within /= nw;
    cross /= nc;
    CAPTURE(within);
    CAPTURE(cross);
    CHECK(within >= cross + 0.1);
}

TEST_CASE("dedup at 0.90 keeps every default-jitter image") {
    const auto specs = default_styles(5, 11);
    Rng rng(13);
    std::size_t total = 0, kept = 0;
    for (const StyleSpec& s : specs) {
        const auto imgs = gen_style(s, 20, 32, rng);
        total += imgs.size();
        kept += dedup_filter(imgs, 0.90).size();
    }
    CAPTURE(total - kept);
    CHECK(kept == total);
}

TEST_CASE("membership split") {
    Rng rng(4);
    const MembershipSplit s20 = split_membership(20, rng);
    CHECK(s20.members.size() == 10);
    CHECK(s20.holdout.size() == 10);
    const MembershipSplit s5 = split_membership(5, rng);
    CHECK(s5.members.size() == 2);
    CHECK(s5.holdout.size() == 3);

    for (std::size_t n : {2, 7, 20, 33}) {
        const MembershipSplit s = split_membership(n, rng);
        std::set<std::size_t> all(s.members.begin(), s.members.end());
        all.insert(s.holdout.begin(), s.holdout.end());
        CHECK(all.size() == n);
        CHECK(*all.rbegin() == n - 1);
    }
    Rng a(9), b(9);
    const MembershipSplit x = split_membership(20, a), y = split_membership(20, b);
    CHECK(x.members == y.members);
    CHECK(x.holdout == y.holdout);
    CHECK_THROWS_AS(split_membership(1, rng), Error);
}

TEST_CASE("corpus mixes every kind") {
    Rng rng(6);
    const auto corpus = gen_corpus(12, 16, rng);
    CHECK(corpus.size() == 12);
    for (const Grid& g : corpus) CHECK(g.shape() == Shape{16, 16});
}
