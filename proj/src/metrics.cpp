// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cgidm/error.hpp"

namespace cgidm {

namespace {

constexpr double kPooledWeight = 0.25;

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    if (i < 0) return static_cast<std::size_t>(-i);
    if (i >= static_cast<std::ptrdiff_t>(n)) return static_cast<std::size_t>(2 * static_cast<std::ptrdiff_t>(n) - 2 - i);
    return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<double> feature_embed(const Grid& image) {
    const std::size_t rows = image.rows(), cols = image.cols();
    require(rows % 4 == 0 && cols % 4 == 0 && rows >= 4 && cols >= 4, ErrorCode::shape_mismatch,
            "feature_embed: image sides must be multiples of 4, got " + shape_string(image.shape()));
    std::vector<double> f(kFeatureDim, 0.0);

    const std::size_t ph = rows / 4, pw = cols / 4;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) f[(r / ph) * 4 + c / pw] += image.at(r, c);
    }

    // magnitude-weighted unsigned orientation histograms, 8 bins over [0, pi)
    const std::size_t qh = rows / 2, qw = cols / 2;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto ri = static_cast<std::ptrdiff_t>(r), ci = static_cast<std::ptrdiff_t>(c);
            const double gx = 0.5 * (image.at(r, reflect_index(ci + 1, cols)) - image.at(r, reflect_index(ci - 1, cols)));
            const double gy = 0.5 * (image.at(reflect_index(ri + 1, rows), c) - image.at(reflect_index(ri - 1, rows), c));
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx);  // (-pi, pi]
            if (angle < 0.0) angle += std::numbers::pi;
            auto bin = static_cast<std::size_t>(std::floor(angle / std::numbers::pi * 8.0));
            bin %= 8;
            const std::size_t quadrant = (r / qh) * 2 + c / qw;
            f[16 + quadrant * 8 + bin] += mag;
        }
    }
    // both blocks at unit norm, then pooled scaled to kPooledWeight
    const std::span<double> pooled(f.data(), 16), hist(f.data() + 16, kFeatureDim - 16);
    const double pn = l2_norm(pooled), hn = l2_norm(hist);
    if (pn > 0.0) {
        for (auto& v : pooled) v *= kPooledWeight / pn;
    }
    if (hn > 0.0) {
        for (auto& v : hist) v /= hn;
    }

    const double norm = l2_norm(f);
    if (norm > 0.0) {
        for (auto& v : f) v /= norm;
    }
    return f;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::shape_mismatch, "cosine_sim: dimension mismatch");
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double feature_similarity(const Grid& a, const Grid& b) {
    return cosine_sim(feature_embed(a), feature_embed(b));
}

double ssim(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "ssim");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const std::size_t rows = a.rows(), cols = a.cols();
    const std::size_t wh = std::min<std::size_t>(8, rows), ww = std::min<std::size_t>(8, cols);
    constexpr std::size_t stride = 4;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r0 = 0; r0 + wh <= rows; r0 += stride) {
        for (std::size_t c0 = 0; c0 + ww <= cols; c0 += stride) {
            double ma = 0.0, mb = 0.0;
            for (std::size_t r = r0; r < r0 + wh; ++r) {
                for (std::size_t c = c0; c < c0 + ww; ++c) {
                    ma += a.at(r, c);
                    mb += b.at(r, c);
                }
            }
            const double n = static_cast<double>(wh * ww);
            ma /= n;
            mb /= n;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (std::size_t r = r0; r < r0 + wh; ++r) {
                for (std::size_t c = c0; c < c0 + ww; ++c) {
                    const double da = a.at(r, c) - ma, db = b.at(r, c) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

std::string metric_name(SimilarityMetric m) { return m == SimilarityMetric::cosine ? "cosine" : "ssim"; }

SimilarityMetric parse_metric(const std::string& name) {
    if (name == "cosine") return SimilarityMetric::cosine;
    if (name == "ssim") return SimilarityMetric::ssim;
    fail(ErrorCode::invalid_argument, "unknown metric '" + name + "' (expected cosine or ssim)");
}

double similarity(SimilarityMetric m, const Grid& a, const Grid& b) {
    return m == SimilarityMetric::cosine ? feature_similarity(a, b) : ssim(a, b);
}

double best_of_k(const Grid& target, std::span<const Grid> candidates, SimilarityMetric metric) {
    require(!candidates.empty(), ErrorCode::invalid_argument, "best_of_k: no candidates");
    double best = -std::numeric_limits<double>::infinity();
    if (metric == SimilarityMetric::cosine) {
        const auto ft = feature_embed(target);
        for (const auto& c : candidates) best = std::max(best, cosine_sim(ft, feature_embed(c)));
    } else {
        for (const auto& c : candidates) best = std::max(best, ssim(target, c));
    }
    return best;
}

double auc(std::span<const double> members, std::span<const double> holdout) {
    require(!members.empty() && !holdout.empty(), ErrorCode::invalid_argument, "auc: both sides must be nonempty");
    // midrank form of the Mann-Whitney U statistic
    struct Item {
        double score;
        bool member;
    };
    std::vector<Item> items;
    items.reserve(members.size() + holdout.size());
    for (double s : members) items.push_back({s, true});
    for (double s : holdout) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (items[k].member) rank_sum += midrank;
        }
        i = j;
    }
    const double m = static_cast<double>(members.size());
    const double h = static_cast<double>(holdout.size());
    return (rank_sum - m * (m + 1.0) / 2.0) / (m * h);
}

std::vector<double> ScoreTable::member_scores() const {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.is_member) out.push_back(r.score);
    }
    return out;
}

std::vector<double> ScoreTable::holdout_scores() const {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (!r.is_member) out.push_back(r.score);
    }
    return out;
}

namespace {

struct Sweep {
    std::size_t correct;
    double threshold;
};

// Best "score >= thr => member" split over one group of rows.
Sweep best_split(std::vector<ScoreRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) { return a.score < b.score; });
    std::size_t members_total = 0;
    for (const auto& r : rows) members_total += r.is_member ? 1 : 0;
    // threshold -inf: everything is a member
    Sweep best{members_total, -std::numeric_limits<double>::infinity()};
    std::size_t correct = members_total;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].score == rows[i].score) {
            // this group now falls below the threshold
            if (rows[j].is_member) {
                --correct;
            } else {
                ++correct;
            }
            ++j;
        }
        const double thr = j < rows.size() ? 0.5 * (rows[i].score + rows[j].score)
                                           : std::numeric_limits<double>::infinity();
        if (correct > best.correct) best = {correct, thr};
        i = j;
    }
    return best;
}

}  // namespace

ThresholdResult best_threshold_acc(const ScoreTable& table, ThresholdMode mode) {
    require(!table.rows.empty(), ErrorCode::invalid_argument, "best_threshold_acc: empty table");
    for (const auto& r : table.rows) require_finite(std::span<const double>(&r.score, 1), "score table");
    std::map<int, std::vector<ScoreRow>> groups;
    for (const auto& r : table.rows) groups[r.cls].push_back(r);
    for (const auto& [cls, rows] : groups) {
        const bool has_member = std::any_of(rows.begin(), rows.end(), [](const ScoreRow& r) { return r.is_member; });
        const bool has_holdout = std::any_of(rows.begin(), rows.end(), [](const ScoreRow& r) { return !r.is_member; });
        require(has_member && has_holdout, ErrorCode::invalid_argument,
                "best_threshold_acc: class " + std::to_string(cls) + " needs at least one member and one holdout");
    }
    ThresholdResult result;
    if (mode == ThresholdMode::universal) {
        const auto s = best_split(table.rows);
        result.accuracy = static_cast<double>(s.correct) / static_cast<double>(table.rows.size());
        result.thresholds[-1] = s.threshold;
        return result;
    }
    std::size_t correct = 0;
    for (const auto& [cls, rows] : groups) {
        const auto s = best_split(rows);
        correct += s.correct;
        result.thresholds[cls] = s.threshold;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(table.rows.size());
    return result;
}

std::vector<std::size_t> dedup_filter(std::span<const Grid> images, double tau) {
    require(tau > 0.0 && tau <= 1.0, ErrorCode::invalid_argument, "dedup_filter: tau must lie in (0, 1]");
    std::vector<std::vector<double>> kept_features;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto f = feature_embed(images[i]);
        bool duplicate = false;
        for (const auto& g : kept_features) {
            if (cosine_sim(f, g) > tau) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            kept.push_back(i);
            kept_features.push_back(std::move(f));
        }
    }
    return kept;
}

}  // namespace cgidm
