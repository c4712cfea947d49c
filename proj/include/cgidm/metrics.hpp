// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cgidm/grid.hpp"

namespace cgidm {

inline constexpr std::size_t kFeatureDim = 48;

/// 16 average-pooled intensities (4x4 cells) followed by four 8-bin
/// magnitude-weighted unsigned gradient-orientation histograms over [0, pi)
/// (one per quadrant). Each block is L2-normalized, the pooled block is
/// weighted 0.25, and the whole vector is L2-normalized. Zero vector only
/// for an all-zero image.
std::vector<double> feature_embed(const Grid& image);

/// a.b / (|a||b|), 0 when either side is zero.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// cosine_sim of the two images' feature vectors.
double feature_similarity(const Grid& a, const Grid& b);

/// Mean single-scale SSIM over 8x8 windows with stride 4, data range 1.
double ssim(const Grid& a, const Grid& b);

enum class SimilarityMetric { cosine, ssim };
std::string metric_name(SimilarityMetric m);
SimilarityMetric parse_metric(const std::string& name);
double similarity(SimilarityMetric m, const Grid& a, const Grid& b);

/// Highest similarity between `target` and any candidate.
double best_of_k(const Grid& target, std::span<const Grid> candidates, SimilarityMetric metric);

/// Probability that a random member outranks a random holdout, ties 1/2.
double auc(std::span<const double> members, std::span<const double> holdout);

struct ScoreRow {
    int cls = 0;
    int image = 0;
    bool is_member = false;
    double score = 0.0;
};

struct ScoreTable {
    std::string metric;  // "cosine" or "ssim"
    std::vector<ScoreRow> rows;

    std::vector<double> member_scores() const;
    std::vector<double> holdout_scores() const;
};

enum class ThresholdMode { universal, per_class };

struct ThresholdResult {
    double accuracy = 0.0;
    /// One entry (class -1) for universal mode, one per class otherwise.
    std::map<int, double> thresholds;
};

/// Best accuracy of the rule "score >= threshold means member" over the
/// candidates -inf, +inf and midpoints between consecutive distinct scores.
ThresholdResult best_threshold_acc(const ScoreTable& table, ThresholdMode mode);

/// Greedy pass in input order; an image is dropped when its feature cosine to
/// any kept image exceeds tau. Returns the kept indices.
std::vector<std::size_t> dedup_filter(std::span<const Grid> images, double tau);

}  // namespace cgidm
