// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cgidm/grid.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

/// Training-time augmentations used as defenses against authentication.
///   hflip:     mirror left-right with probability 1/2
///   cutout:    zero a square of side image_side/8 at a random position
///   rand_lite: one op drawn uniformly from {hflip, cutout,
///              brightness +-0.2, gaussian noise sigma 0.05}
enum class DefenseKind { hflip, cutout, rand_lite };

DefenseKind parse_defense(const std::string& name);
std::string defense_name(DefenseKind kind);

/// Returns an augmented copy; the input is never modified.
Grid apply_defense(const Grid& image, DefenseKind kind, Rng& rng);
Grid apply_defenses(const Grid& image, const std::vector<DefenseKind>& kinds, Rng& rng);

}  // namespace cgidm
