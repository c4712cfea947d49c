// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cgidm/error.hpp"
#include "cgidm/rng.hpp"

namespace cgidm {

MaskKind parse_mask_kind(const std::string& name) {
    if (name == "blur") return MaskKind::blur;
    if (name == "half") return MaskKind::half;
    if (name == "blockwise") return MaskKind::blockwise;
    fail(ErrorCode::invalid_argument, "unknown mask kind '" + name + "' (expected blur, half or blockwise)");
}

std::string mask_kind_name(MaskKind kind) {
    switch (kind) {
        case MaskKind::blur: return "blur";
        case MaskKind::half: return "half";
        case MaskKind::blockwise: return "blockwise";
    }
    return "?";
}

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
    i %= period;
    if (i < 0) i += period;
    if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

Grid gaussian_blur(const Grid& image, std::size_t kernel, double sigma) {
    require(kernel % 2 == 1, ErrorCode::invalid_argument, "blur kernel must be odd");
    require(sigma > 0.0, ErrorCode::invalid_argument, "blur sigma must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
    std::vector<double> w(kernel);
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= total;

    const std::size_t rows = image.rows(), cols = image.cols();
    Grid tmp = Grid::image(rows, cols), out = Grid::image(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                s += w[static_cast<std::size_t>(k + radius)] *
                     image.at(r, reflect(static_cast<std::ptrdiff_t>(c) + k, cols));
            }
            tmp.at(r, c) = s;
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double s = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                s += w[static_cast<std::size_t>(k + radius)] *
                     tmp.at(reflect(static_cast<std::ptrdiff_t>(r) + k, rows), c);
            }
            out.at(r, c) = s;
        }
    }
    return out;
}

PartialImage remove_partial(const Grid& x0, const MaskSpec& spec) {
    const std::size_t rows = x0.rows(), cols = x0.cols();
    PartialImage out{x0, Grid::image(rows, cols, 0.0)};

    switch (spec.kind) {
        case MaskKind::blur: {
            std::size_t kernel = spec.blur_kernel;
            if (kernel == 0) {
                kernel = std::max<std::size_t>(1, std::min(rows, cols) / 4);
                if (kernel % 2 == 0) ++kernel;
            }
            const double sigma = spec.blur_sigma > 0.0 ? spec.blur_sigma : static_cast<double>(kernel) / 2.3;
            out.x_bar = gaussian_blur(x0, kernel, sigma);
            out.mask = Grid::image(rows, cols, 1.0);
            break;
        }
        case MaskKind::half: {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = cols / 2; c < cols; ++c) {
                    out.x_bar.at(r, c) = spec.fill;
                    out.mask.at(r, c) = 1.0;
                }
            }
            break;
        }
        case MaskKind::blockwise: {
            const std::size_t b = spec.block;
            require(b >= 1 && rows % b == 0 && cols % b == 0, ErrorCode::invalid_argument,
                    "blockwise mask: block " + std::to_string(b) + " does not divide " + shape_string(x0.shape()));
            require(spec.fraction > 0.0 && spec.fraction < 1.0, ErrorCode::invalid_argument,
                    "blockwise mask: fraction must lie in (0, 1)");
            const std::size_t brows = rows / b, bcols = cols / b;
            const std::size_t n_blocks = brows * bcols;
            const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n_blocks) * spec.fraction - 1e-9));

            std::vector<std::size_t> order(n_blocks);
            if (spec.selection == BlockSelection::checkerboard) {
                // even-parity blocks first, then odd
                std::size_t pos = 0;
                for (int parity = 0; parity < 2; ++parity) {
                    for (std::size_t i = 0; i < n_blocks; ++i) {
                        if (static_cast<int>((i / bcols + i % bcols) % 2) == parity) order[pos++] = i;
                    }
                }
            } else {
                std::iota(order.begin(), order.end(), std::size_t{0});
                Rng rng(spec.seed);
                for (std::size_t i = 0; i < k; ++i) {
                    const auto j = static_cast<std::size_t>(
                        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n_blocks) - 1));
                    std::swap(order[i], order[j]);
                }
            }
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t br = order[i] / bcols, bc = order[i] % bcols;
                for (std::size_t r = br * b; r < (br + 1) * b; ++r) {
                    for (std::size_t c = bc * b; c < (bc + 1) * b; ++c) {
                        out.x_bar.at(r, c) = spec.fill;
                        out.mask.at(r, c) = 1.0;
                    }
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace cgidm
