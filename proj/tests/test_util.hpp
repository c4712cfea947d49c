// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cgidm/net.hpp"
#include "cgidm/rng.hpp"

namespace cgidm::test {

inline constexpr double kFdStep = 1e-5;

inline NetConfig small_net() {
    NetConfig c;
    c.rows = 6;
    c.cols = 6;
    c.hidden = {24, 16};
    c.time_embed_dim = 8;
    c.T = 100;
    return c;
}

/// Model with every parameter (adapters included) drawn from U(-0.4, 0.4).
inline NoisePredictor random_model(const NetConfig& c, std::uint64_t seed, bool lora) {
    Rng rng(seed);
    NoisePredictor m(c, rng);
    if (lora) m.add_lora(3, 0.7, rng);
    for (auto block : m.parameter_blocks()) {
        for (auto& v : block) v = rng.uniform(-0.4, 0.4);
    }
    return m;
}

/// (f(h) - f(-h)) / 2h with h = 1e-5.
template <typename F>
double central_difference(F&& f) {
    return (f(kFdStep) - f(-kFdStep)) / (2.0 * kFdStep);
}

/// |a - b| / max(|a|, |b|); exact zeros on both sides count as agreement.
inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace cgidm::test
