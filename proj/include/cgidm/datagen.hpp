// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgidm/grid.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

enum class StyleKind { stripes, checker, radial, blobs };

StyleKind parse_style_kind(const std::string& name);
std::string style_kind_name(StyleKind kind);

/// Per-image perturbation magnitudes. All zero => every image is identical.
struct StyleJitter {
    double orientation = 0.0;  // radians, uniform +-
    double frequency = 0.0;    // relative, uniform +-
    double contrast = 0.0;     // absolute, uniform +-
    double phase = 0.0;        // fraction of a period, uniform +-
    double position = 0.0;     // fraction of the side, uniform +- (centers, blobs)
    double brightness = 0.0;   // absolute offset, uniform +-
    double ramp = 0.0;         // peak of a random linear illumination ramp
    double content = 0.0;      // depth of a smooth per-image contrast modulation, in [0, 1]
    double warp = 0.0;         // amplitude of a smooth per-image coordinate warp, fraction of the side
};

/// Base parameters of one style family.
///   orientation  radians in [0, pi)
///   frequency    cycles per image side, in [1.5, 6]
///   contrast     peak-to-peak amplitude, in [0.2, 0.9]
///   brightness   mean level, in [0.3, 0.7]
///   blob_count   blobs per image, in [2, 8] (blobs only)
///   blob_radius  fraction of the side, in [0.06, 0.2] (blobs only)
///   aspect       cross-axis scale, in [0.25, 1]: second checker axis frequency
///                factor and blob minor/major radius ratio
/// Layout (phase, ring center, blob positions) is drawn from `seed`; ring
/// centers may fall outside the image.
struct StyleSpec {
    StyleKind kind = StyleKind::stripes;
    double orientation = 0.0;
    double frequency = 3.0;
    double contrast = 0.6;
    double brightness = 0.5;
    int blob_count = 4;
    double blob_radius = 0.12;
    double aspect = 1.0;
    StyleJitter jitter;
    /// Upper bound on the feature cosine between two images of one gen_style
    /// call, enforced by redrawing (at most 64 draws per image). 0 disables.
    double distinct_tau = 0.9;
    std::uint64_t seed = 0;
};

/// Jitter used by default_styles().
StyleJitter default_jitter();

/// Random style within the documented ranges.
StyleSpec random_style(StyleKind kind, Rng& rng);

/// `count` styles cycling through the four kinds.
std::vector<StyleSpec> default_styles(std::size_t count, std::uint64_t seed);

/// n images of spec's family with per-image jitter drawn from rng. Redraws
/// are skipped when every jitter magnitude is zero.
std::vector<Grid> gen_style(const StyleSpec& spec, std::size_t n, std::size_t size, Rng& rng);

/// Generic images across random styles of every kind, for pretraining.
std::vector<Grid> gen_corpus(std::size_t n, std::size_t size, Rng& rng);

struct MembershipSplit {
    std::vector<std::size_t> members;
    std::vector<std::size_t> holdout;
};

/// Seeded shuffle, floor(n/2) members, the rest holdout.
MembershipSplit split_membership(std::size_t count, Rng& rng);

}  // namespace cgidm
