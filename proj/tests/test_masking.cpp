// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "cgidm/error.hpp"
#include "cgidm/masking.hpp"
#include "cgidm/rng.hpp"
#include "doctest.h"

using namespace cgidm;

namespace {

Grid random_image(std::size_t side, std::uint64_t seed) {
    Rng rng(seed);
    Grid g = Grid::image(side, side);
    for (auto& v : g.values()) v = rng.uniform();
    return g;
}

std::size_t removed(const PartialImage& p) {
    std::size_t n = 0;
    for (double m : p.mask.values()) n += m == 1.0 ? 1 : 0;
    return n;
}

// Mirror index without repeating the edge: -1 -> 1, n -> n - 2.
std::size_t mirror(long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

TEST_CASE("blockwise removes the documented pixel count") {
    MaskSpec spec;
    spec.kind = MaskKind::blockwise;
    spec.block = 4;
    spec.fraction = 0.5;
    spec.fill = 0.5;
    spec.seed = 3;
    const PartialImage p = remove_partial(random_image(16, 1), spec);
    CHECK(removed(p) == 128);

    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t block = std::vector<std::size_t>{1, 2, 4, 8}[static_cast<std::size_t>(trial % 4)];
        spec.block = block;
        spec.fraction = rng.uniform(0.01, 0.99);
        spec.seed = static_cast<std::uint64_t>(trial);
        const std::size_t n_blocks = (32 / block) * (32 / block);
        const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n_blocks) * spec.fraction));
        CAPTURE(block);
        CAPTURE(spec.fraction);
        CHECK(removed(remove_partial(random_image(32, 2), spec)) == k * block * block);
    }
}

TEST_CASE("block sizes 2, 4 and 8 are accepted on 32x32") {
    MaskSpec spec;
    for (std::size_t b : {2, 4, 8}) {
        spec.block = b;
        CHECK_NOTHROW(remove_partial(random_image(32, 4), spec));
    }
    spec.block = 3;
    CHECK_THROWS_AS(remove_partial(random_image(32, 4), spec), Error);
    spec.block = 4;
    spec.fraction = 1.0;
    CHECK_THROWS_AS(remove_partial(random_image(32, 4), spec), Error);
    spec.fraction = 0.0;
    CHECK_THROWS_AS(remove_partial(random_image(32, 4), spec), Error);
}

TEST_CASE("unmasked pixels are bit identical and masked ones hold the fill") {
    for (MaskKind kind : {MaskKind::half, MaskKind::blockwise}) {
        MaskSpec spec;
        spec.kind = kind;
        spec.fill = 0.37;
        spec.seed = 11;
        const Grid x0 = random_image(16, 5);
        const PartialImage p = remove_partial(x0, spec);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (p.mask[i] == 0.0) {
                CHECK(p.x_bar[i] == x0[i]);
            } else {
                CHECK(p.mask[i] == 1.0);
                CHECK(p.x_bar[i] == 0.37);
            }
        }
    }
}

TEST_CASE("half mask covers the right half") {
    MaskSpec spec;
    spec.kind = MaskKind::half;
    spec.fill = 0.25;
    const PartialImage p = remove_partial(Grid::image(6, 7, 0.25), spec);
    CHECK(p.x_bar == Grid::image(6, 7, 0.25));
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 7; ++c) CHECK(p.mask.at(r, c) == (c >= 3 ? 1.0 : 0.0));
    }
}

TEST_CASE("masking is deterministic under seed") {
    MaskSpec spec;
    spec.seed = 21;
    const Grid x0 = random_image(32, 6);
    const PartialImage a = remove_partial(x0, spec), b = remove_partial(x0, spec);
    CHECK(a.x_bar == b.x_bar);
    CHECK(a.mask == b.mask);
    spec.seed = 22;
    CHECK(remove_partial(x0, spec).mask != a.mask);
}

TEST_CASE("checkerboard selection at half takes even-parity blocks") {
    MaskSpec spec;
    spec.block = 4;
    spec.fraction = 0.5;
    spec.selection = BlockSelection::checkerboard;
    const PartialImage p = remove_partial(random_image(16, 7), spec);
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 16; ++c) CHECK(p.mask.at(r, c) == ((r / 4 + c / 4) % 2 == 0 ? 1.0 : 0.0));
    }
}

TEST_CASE("blur equals direct two-dimensional convolution with reflect boundary") {
    const Grid x0 = random_image(9, 8);
    const std::size_t kernel = 5;
    const double sigma = 1.3;
    const Grid out = gaussian_blur(x0, kernel, sigma);
    std::vector<double> w;
    double total = 0.0;
    for (int k = -2; k <= 2; ++k) {
        w.push_back(std::exp(-k * k / (2.0 * sigma * sigma)));
        total += w.back();
    }
    for (long r = 0; r < 9; ++r) {
        for (long c = 0; c < 9; ++c) {
            double s = 0.0;
            for (long i = -2; i <= 2; ++i) {
                for (long j = -2; j <= 2; ++j) {
                    s += w[static_cast<std::size_t>(i + 2)] * w[static_cast<std::size_t>(j + 2)] *
                         x0.at(mirror(r + i, 9), mirror(c + j, 9));
                }
            }
            CHECK(out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) ==
                  doctest::Approx(s / (total * total)).epsilon(1e-13));
        }
    }
    const Grid flat = gaussian_blur(Grid::image(8, 8, 0.3), 5, 2.0);
    for (double v : flat.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian_blur(x0, 4, 1.0), Error);
    CHECK_THROWS_AS(gaussian_blur(x0, 3, 0.0), Error);
}

TEST_CASE("blur mask defaults scale with the image") {
    MaskSpec spec;
    spec.kind = MaskKind::blur;
    const Grid x0 = random_image(32, 9);
    const PartialImage p = remove_partial(x0, spec);
    // side 32 -> kernel 8, made odd -> 9, sigma 9 / 2.3
    CHECK(p.x_bar == gaussian_blur(x0, 9, 9.0 / 2.3));
    CHECK(removed(p) == x0.size());
}

TEST_CASE("mask kind names round trip") {
    for (MaskKind k : {MaskKind::blur, MaskKind::half, MaskKind::blockwise}) CHECK(parse_mask_kind(mask_kind_name(k)) == k);
    CHECK_THROWS_AS(parse_mask_kind("lasso"), Error);
}
