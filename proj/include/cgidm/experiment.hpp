// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cgidm/config.hpp"
#include "cgidm/datagen.hpp"
#include "cgidm/inversion.hpp"
#include "cgidm/masking.hpp"
#include "cgidm/metrics.hpp"
#include "cgidm/net.hpp"

namespace cgidm {

/// Independent seed for (stream, index) under a root seed; splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0);

/// Seed streams; values are part of the output format and must not change.
namespace streams {
inline constexpr std::uint64_t styles = 1, style_images = 2, split = 3, corpus = 4, pretrain = 5, finetune = 6,
                               mask = 7, invert = 8, baseline = 9, mia = 10, autoencoder = 11;
}

struct StyleData {
    StyleSpec spec;
    std::vector<Grid> images;
    MembershipSplit split;
    bool is_member(std::size_t i) const;
    std::vector<Grid> members() const;
    std::vector<Grid> holdout() const;
};

struct Dataset {
    std::vector<StyleData> styles;
    std::vector<Grid> corpus;  // pretraining images, disjoint styles
    /// Mean pixel value over all style images.
    double mean_intensity() const;
    /// Pixel standard deviation of the corpus.
    double corpus_std() const;
};

/// Pixel values are snapped to multiples of 1/255.
Dataset generate_dataset(const ExperimentConfig& cfg);

struct Models {
    std::optional<AutoEncoder> autoencoder;
    NoisePredictor pretrained;
    std::vector<NoisePredictor> finetuned;  // one per style
};

/// Images in the space the diffusion models live in.
std::vector<Grid> model_space(const ExperimentConfig& cfg, const std::optional<AutoEncoder>& ae,
                              const std::vector<Grid>& images);

AutoEncoder train_autoencoder_stage(const ExperimentConfig& cfg, const Dataset& data);
NoisePredictor pretrain_stage(const ExperimentConfig& cfg, const Dataset& data, const std::optional<AutoEncoder>& ae,
                              LossLog* log = nullptr);
NoisePredictor finetune_stage(const ExperimentConfig& cfg, const Dataset& data, std::size_t style,
                              const NoisePredictor& pretrained, const std::optional<AutoEncoder>& ae,
                              LossLog* log = nullptr);
/// All of the above; fine-tunes styles in parallel over `jobs` threads.
Models train_models(const ExperimentConfig& cfg, const Dataset& data, int jobs = 1);

/// The configured mask with fill and seed resolved for one image.
MaskSpec mask_for(const ExperimentConfig& cfg, const Dataset& data, std::size_t style, std::size_t image);
PartialImage partial_for(const ExperimentConfig& cfg, const Dataset& data, std::size_t style, std::size_t image);

/// cfg.budget, else the mean ||x_bar - x0|| over every style image, measured
/// in model space.
double inversion_budget(const ExperimentConfig& cfg, const Dataset& data, const std::optional<AutoEncoder>& ae);

struct ImageRef {
    std::size_t style = 0;
    std::size_t image = 0;
    bool member = false;
};

/// Every style image, or only the first `max_styles` styles when non-zero.
std::vector<ImageRef> image_refs(const Dataset& data, std::size_t max_styles = 0);

struct Recovered {
    ImageRef ref;
    Grid image;
    std::vector<TraceRow> trace;
};

Recovered invert_image(const ExperimentConfig& cfg, const Dataset& data, const Models& models, const ImageRef& ref,
                       double budget);
std::vector<Recovered> invert_images(const ExperimentConfig& cfg, const Dataset& data, const Models& models,
                                     const std::vector<ImageRef>& refs, int jobs = 1);

/// K generations for one input from the fine-tuned model of its style.
std::vector<Grid> baseline_candidates(const ExperimentConfig& cfg, const Dataset& data, const Models& models,
                                      const ImageRef& ref);

/// One score per image: similarity of its recovery, or best-of-K over its
/// candidates, to the original.
ScoreTable score_recovered(const Dataset& data, const std::vector<Recovered>& rec, SimilarityMetric metric);
ScoreTable score_candidates(const Dataset& data, const std::vector<ImageRef>& refs,
                            const std::vector<std::vector<Grid>>& candidates, SimilarityMetric metric);

struct Summary {
    std::string metric;
    double acc_universal = 0.0;
    double acc_per_class = 0.0;
    double auc = 0.5;
};

Summary summarize(const ScoreTable& table);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cgidm
