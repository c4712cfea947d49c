// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include "cgidm/grid.hpp"

namespace cgidm {

/// xoshiro256++ seeded through splitmix64. Gaussians come from Box-Muller;
/// both outputs of a transform are used, the second one is cached.
///
/// Single owner. Parallel workers get their own generator via split().
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Integer uniform on [lo, hi] inclusive. Throws when lo > hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double gaussian();

    /// Independent generator for task `index`: seed XOR index.
    Rng split(std::uint64_t index) const { return Rng(seed_ ^ index); }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
    std::optional<double> spare_;
};

/// Box-Muller transform of u1 in (0, 1], u2 in [0, 1).
std::pair<double, double> box_muller(double u1, double u2);

/// Grid of i.i.d. standard normals.
Grid gaussian_sample(Rng& rng, const Shape& shape);

/// Timestep uniform on [lo, hi]; requires 1 <= lo <= hi.
int uniform_timestep(Rng& rng, int lo, int hi);

}  // namespace cgidm
