// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/defense.hpp"

#include <algorithm>

#include "cgidm/error.hpp"

namespace cgidm {

DefenseKind parse_defense(const std::string& name) {
    if (name == "hflip") return DefenseKind::hflip;
    if (name == "cutout") return DefenseKind::cutout;
    if (name == "rand_lite") return DefenseKind::rand_lite;
    fail(ErrorCode::invalid_argument, "unknown defense '" + name + "' (expected hflip, cutout or rand_lite)");
}

std::string defense_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::hflip: return "hflip";
        case DefenseKind::cutout: return "cutout";
        case DefenseKind::rand_lite: return "rand_lite";
    }
    return "?";
}

namespace {

Grid hflip(const Grid& img) {
    Grid out = img;
    const std::size_t rows = img.rows(), cols = img.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out.at(r, cols - 1 - c) = img.at(r, c);
    }
    return out;
}

Grid cutout(const Grid& img, Rng& rng) {
    Grid out = img;
    const std::size_t side = std::max<std::size_t>(1, std::min(img.rows(), img.cols()) / 8);
    const auto r0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.rows() - side)));
    const auto c0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.cols() - side)));
    for (std::size_t r = r0; r < r0 + side; ++r) {
        for (std::size_t c = c0; c < c0 + side; ++c) out.at(r, c) = 0.0;
    }
    return out;
}

}  // namespace

Grid apply_defense(const Grid& image, DefenseKind kind, Rng& rng) {
    switch (kind) {
        case DefenseKind::hflip:
            return rng.uniform() < 0.5 ? hflip(image) : image;
        case DefenseKind::cutout:
            return cutout(image, rng);
        case DefenseKind::rand_lite: {
            switch (rng.uniform_int(0, 3)) {
                case 0: return hflip(image);
                case 1: return cutout(image, rng);
                case 2: {
                    const double shift = rng.uniform(-0.2, 0.2);
                    Grid out = image;
                    for (auto& v : out.values()) v += shift;
                    return clamp01(std::move(out));
                }
                default: {
                    Grid out = image;
                    for (auto& v : out.values()) v += 0.05 * rng.gaussian();
                    return clamp01(std::move(out));
                }
            }
        }
    }
    return image;
}

Grid apply_defenses(const Grid& image, const std::vector<DefenseKind>& kinds, Rng& rng) {
    Grid out = image;
    for (auto kind : kinds) out = apply_defense(out, kind, rng);
    return out;
}

}  // namespace cgidm
