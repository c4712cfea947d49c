// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/rng.hpp"

#include <cmath>
#include <numbers>

#include "cgidm/error.hpp"

namespace cgidm {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, ErrorCode::invalid_argument,
            "uniform_int: empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    // rejection keeps every value equally likely
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return lo + static_cast<std::int64_t>(r % span);
}

std::pair<double, double> box_muller(double u1, double u2) {
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

double Rng::gaussian() {
    if (spare_) {
        const double z = *spare_;
        spare_.reset();
        return z;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    auto [z1, z2] = box_muller(u1, u2);
    spare_ = z2;
    return z1;
}

Grid gaussian_sample(Rng& rng, const Shape& shape) {
    Grid g(shape);
    for (auto& v : g.values()) v = rng.gaussian();
    return g;
}

int uniform_timestep(Rng& rng, int lo, int hi) {
    require(lo >= 1, ErrorCode::invalid_argument, "uniform_timestep: lo must be >= 1");
    require(lo <= hi, ErrorCode::invalid_argument, "uniform_timestep: lo > hi");
    return static_cast<int>(rng.uniform_int(lo, hi));
}

}  // namespace cgidm
