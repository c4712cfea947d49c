// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cgidm/error.hpp"
#include "cgidm/metrics.hpp"

namespace cgidm {

StyleKind parse_style_kind(const std::string& name) {
    if (name == "stripes") return StyleKind::stripes;
    if (name == "checker") return StyleKind::checker;
    if (name == "radial") return StyleKind::radial;
    if (name == "blobs") return StyleKind::blobs;
    fail(ErrorCode::invalid_argument, "unknown style kind '" + name + "'");
}

std::string style_kind_name(StyleKind kind) {
    switch (kind) {
        case StyleKind::stripes: return "stripes";
        case StyleKind::checker: return "checker";
        case StyleKind::radial: return "radial";
        case StyleKind::blobs: return "blobs";
    }
    return "?";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kWarpWaves = 4;
constexpr double kWarpKLo = 0.5, kWarpKHi = 1.0;  // cycles per side
constexpr double kCenterLo = -0.3, kCenterHi = 1.3;
constexpr double kBumpSigma = 0.2;

// Concrete parameters of one rendered image.
struct Realization {
    StyleKind kind = StyleKind::stripes;
    double orientation = 0.0, frequency = 0.0, contrast = 0.0, brightness = 0.0, phase = 0.0;
    double cx = 0.5, cy = 0.5;
    double ramp_x = 0.0, ramp_y = 0.0;
    double blob_radius = 0.0;
    double aspect = 1.0;
    std::vector<std::pair<double, double>> blobs;
    double content = 0.0;
    std::vector<std::pair<double, double>> bumps;  // centers of the modulation field
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<Wave> warp_u, warp_v;
};

// Layout shared by all images of a style, derived from spec.seed.
Realization base_layout(const StyleSpec& spec) {
    Rng rng(spec.seed);
    Realization r;
    r.kind = spec.kind;
    r.orientation = spec.orientation;
    r.frequency = spec.frequency;
    r.contrast = spec.contrast;
    r.brightness = spec.brightness;
    r.blob_radius = spec.blob_radius;
    r.aspect = spec.aspect;
    r.phase = rng.uniform();
    r.cx = rng.uniform(kCenterLo, kCenterHi);
    r.cy = rng.uniform(kCenterLo, kCenterHi);
    for (int i = 0; i < spec.blob_count; ++i) r.blobs.emplace_back(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
    return r;
}

double sym(Rng& rng, double magnitude) { return magnitude == 0.0 ? 0.0 : rng.uniform(-magnitude, magnitude); }

Realization jittered(const Realization& base, const StyleJitter& j, Rng& rng) {
    Realization r = base;
    r.orientation += sym(rng, j.orientation);
    r.frequency *= 1.0 + sym(rng, j.frequency);
    r.contrast = std::max(0.05, r.contrast + sym(rng, j.contrast));
    r.phase += sym(rng, j.phase);
    r.brightness += sym(rng, j.brightness);
    r.cx += sym(rng, j.position);
    r.cy += sym(rng, j.position);
    for (auto& [x, y] : r.blobs) {
        x += sym(rng, j.position);
        y += sym(rng, j.position);
    }
    if (j.content > 0.0) {
        r.content = j.content;
        for (int i = 0; i < 3; ++i) r.bumps.emplace_back(rng.uniform(), rng.uniform());
    }
    if (j.warp > 0.0) {
        for (auto* waves : {&r.warp_u, &r.warp_v}) {
            for (int i = 0; i < kWarpWaves; ++i) {
                const double angle = rng.uniform(0.0, kTwoPi);
                const double k = rng.uniform(kWarpKLo, kWarpKHi);
                waves->push_back({k * std::cos(angle), k * std::sin(angle), rng.uniform(0.0, kTwoPi),
                                  j.warp * rng.uniform(0.5, 1.0)});
            }
        }
    }
    if (j.ramp != 0.0) {
        const double angle = rng.uniform(0.0, kTwoPi);
        const double amp = rng.uniform(0.0, j.ramp);
        r.ramp_x = amp * std::cos(angle);
        r.ramp_y = amp * std::sin(angle);
    }
    return r;
}

Grid render(const Realization& r, std::size_t size) {
    Grid g = Grid::image(size, size);
    const double n = static_cast<double>(size);
    const double co = std::cos(r.orientation), si = std::sin(r.orientation);
    for (std::size_t row = 0; row < size; ++row) {
        for (std::size_t col = 0; col < size; ++col) {
            const double u0 = (static_cast<double>(col) + 0.5) / n;
            const double v0 = (static_cast<double>(row) + 0.5) / n;
            double u = u0, v = v0;
            for (const auto& w : r.warp_u) u += w.amp * std::sin(kTwoPi * (w.kx * u0 + w.ky * v0) + w.phase);
            for (const auto& w : r.warp_v) v += w.amp * std::sin(kTwoPi * (w.kx * u0 + w.ky * v0) + w.phase);
            double pattern = 0.0;  // in [-1, 1]
            switch (r.kind) {
                case StyleKind::stripes:
                    pattern = std::sin(kTwoPi * (r.frequency * (u * co + v * si) + r.phase));
                    break;
                case StyleKind::checker: {
                    const double a = u * co + v * si, b = -u * si + v * co;
                    const double s = std::sin(kTwoPi * (r.frequency * a + r.phase)) *
                                     std::sin(kTwoPi * (r.frequency * r.aspect * b + r.phase));
                    pattern = std::tanh(4.0 * s);
                    break;
                }
                case StyleKind::radial: {
                    const double d = std::hypot(u - r.cx, v - r.cy);
                    pattern = std::cos(kTwoPi * (r.frequency * d + r.phase));
                    break;
                }
                case StyleKind::blobs: {
                    double s = 0.0;
                    const double major = r.blob_radius, minor = r.blob_radius * r.aspect;
                    for (const auto& [bx, by] : r.blobs) {
                        const double a = (u - bx) * co + (v - by) * si;
                        const double b = -(u - bx) * si + (v - by) * co;
                        s += std::exp(-0.5 * (a * a / (major * major) + b * b / (minor * minor)));
                    }
                    pattern = 2.0 * std::min(1.0, s) - 1.0;
                    break;
                }
            }
            double depth = 1.0;
            if (!r.bumps.empty()) {
                double field = 0.0;
                for (const auto& [bx, by] : r.bumps) {
                    field += std::exp(-((u0 - bx) * (u0 - bx) + (v0 - by) * (v0 - by)) / (2.0 * kBumpSigma * kBumpSigma));
                }
                depth = 1.0 - r.content + r.content * std::min(1.0, field);
            }
            pattern *= depth;
            const double ramp = r.ramp_x * (u0 - 0.5) * 2.0 + r.ramp_y * (v0 - 0.5) * 2.0;
            g.at(row, col) = std::clamp(r.brightness + 0.5 * r.contrast * pattern + ramp, 0.0, 1.0);
        }
    }
    return g;
}

}  // namespace

StyleJitter default_jitter() {
    StyleJitter j;
    j.orientation = 0.25;
    j.frequency = 0.2;
    j.contrast = 0.1;
    j.phase = 0.5;
    j.position = 0.12;
    j.brightness = 0.08;
    j.ramp = 0.2;
    j.content = 0.5;
    j.warp = 0.1;
    return j;
}

StyleSpec random_style(StyleKind kind, Rng& rng) {
    StyleSpec s;
    s.kind = kind;
    s.orientation = rng.uniform(0.0, std::numbers::pi);
    s.frequency = rng.uniform(1.5, 6.0);
    s.contrast = rng.uniform(0.4, 0.9);
    s.brightness = rng.uniform(0.35, 0.65);
    s.blob_count = static_cast<int>(rng.uniform_int(2, 8));
    s.blob_radius = rng.uniform(0.06, 0.2);
    s.aspect = rng.uniform(0.25, 0.6);
    s.jitter = default_jitter();
    if (kind == StyleKind::stripes || kind == StyleKind::checker) {
        // stripes and checker carry stronger warp and content jitter
        s.jitter.warp = 0.13;
        s.jitter.content = 0.8;
    }
    s.seed = rng.next_u64();
    return s;
}

std::vector<StyleSpec> default_styles(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    constexpr StyleKind kinds[] = {StyleKind::stripes, StyleKind::checker, StyleKind::radial, StyleKind::blobs};
    std::vector<StyleSpec> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_style(kinds[i % 4], rng));
    return out;
}

constexpr int kMaxRedraws = 64;

std::vector<Grid> gen_style(const StyleSpec& spec, std::size_t n, std::size_t size, Rng& rng) {
    require(n >= 1, ErrorCode::invalid_argument, "gen_style: n must be >= 1");
    require(size >= 8 && size % 8 == 0, ErrorCode::invalid_argument, "gen_style: size must be a positive multiple of 8");
    const Realization base = base_layout(spec);
    std::vector<Grid> out;
    out.reserve(n);
    const StyleJitter& j = spec.jitter;
    const bool jitter_off = j.orientation == 0.0 && j.frequency == 0.0 && j.contrast == 0.0 && j.phase == 0.0 &&
                            j.position == 0.0 && j.brightness == 0.0 && j.ramp == 0.0 && j.content == 0.0 &&
                            j.warp == 0.0;
    std::vector<std::vector<double>> feats;
    for (std::size_t i = 0; i < n; ++i) {
        Grid img = render(jittered(base, j, rng), size);
        if (!jitter_off && spec.distinct_tau > 0.0) {
            // redraw while a kept image is closer than distinct_tau; the last draw stands
            for (int attempt = 1; attempt < kMaxRedraws; ++attempt) {
                auto f = feature_embed(img);
                const bool close = std::any_of(feats.begin(), feats.end(), [&](const std::vector<double>& g) {
                    return cosine_sim(f, g) > spec.distinct_tau;
                });
                if (!close) break;
                img = render(jittered(base, j, rng), size);
            }
            feats.push_back(feature_embed(img));
        }
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<Grid> gen_corpus(std::size_t n, std::size_t size, Rng& rng) {
    constexpr StyleKind kinds[] = {StyleKind::stripes, StyleKind::checker, StyleKind::radial, StyleKind::blobs};
    std::vector<Grid> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const StyleSpec spec = random_style(kinds[i % 4], rng);
        out.push_back(gen_style(spec, 1, size, rng).front());
    }
    return out;
}

MembershipSplit split_membership(std::size_t count, Rng& rng) {
    require(count >= 2, ErrorCode::invalid_argument, "split_membership: need at least two images");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = count; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    MembershipSplit split;
    const std::size_t half = count / 2;
    split.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    split.holdout.assign(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
    std::sort(split.members.begin(), split.members.end());
    std::sort(split.holdout.begin(), split.holdout.end());
    return split;
}

}  // namespace cgidm
