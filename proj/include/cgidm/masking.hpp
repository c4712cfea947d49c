// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "cgidm/grid.hpp"

namespace cgidm {

enum class MaskKind { blur, half, blockwise };
enum class BlockSelection { random, checkerboard };

struct MaskSpec {
    MaskKind kind = MaskKind::blockwise;
    std::size_t block = 4;
    double fraction = 0.5;
    double fill = 0.5;
    /// Blur kernel width and sigma; 0 picks side/4 (made odd) and kernel/2.3.
    std::size_t blur_kernel = 0;
    double blur_sigma = 0.0;
    BlockSelection selection = BlockSelection::random;
    std::uint64_t seed = 0;
};

MaskKind parse_mask_kind(const std::string& name);
std::string mask_kind_name(MaskKind kind);

struct PartialImage {
    Grid x_bar;
    Grid mask;  // 1 where information was removed
};

/// Remove part of x0.
///   blur:      separable Gaussian with reflect padding; mask is all ones.
///   half:      right half (columns >= cols/2) replaced by `fill`.
///   blockwise: ceil(n_blocks * fraction) blocks of block x block pixels,
///              chosen without replacement, replaced by `fill`.
PartialImage remove_partial(const Grid& x0, const MaskSpec& spec);

/// Gaussian blur with reflect ("mirror without edge repeat") boundary.
Grid gaussian_blur(const Grid& image, std::size_t kernel, double sigma);

}  // namespace cgidm
