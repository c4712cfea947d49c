// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "cgidm/error.hpp"

namespace cgidm {

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(root) ^ stream) ^ index);
}

bool StyleData::is_member(std::size_t i) const {
    return std::binary_search(split.members.begin(), split.members.end(), i);
}

std::vector<Grid> StyleData::members() const {
    std::vector<Grid> out;
    for (auto i : split.members) out.push_back(images[i]);
    return out;
}

std::vector<Grid> StyleData::holdout() const {
    std::vector<Grid> out;
    for (auto i : split.holdout) out.push_back(images[i]);
    return out;
}

double Dataset::mean_intensity() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : styles) {
        for (const auto& g : s.images) {
            for (double v : g.values()) sum += v;
            n += g.size();
        }
    }
    require(n > 0, ErrorCode::invalid_argument, "mean_intensity: empty dataset");
    return sum / static_cast<double>(n);
}

double Dataset::corpus_std() const {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& g : corpus) {
        for (double v : g.values()) {
            sum += v;
            sq += v * v;
        }
        n += g.size();
    }
    require(n > 0, ErrorCode::invalid_argument, "corpus_std: empty corpus");
    const double m = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m));
}

namespace {

// Snap to the PGM grid so images reloaded from disk equal the generated ones.
void quantize(std::vector<Grid>& images) {
    for (auto& g : images) {
        for (auto& v : g.values()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
}

}  // namespace

Dataset generate_dataset(const ExperimentConfig& cfg) {
    Dataset data;
    const auto specs = default_styles(cfg.styles, derive_seed(cfg.seed, streams::styles));
    for (std::size_t s = 0; s < specs.size(); ++s) {
        StyleData sd;
        sd.spec = specs[s];
        Rng img_rng(derive_seed(cfg.seed, streams::style_images, s));
        sd.images = gen_style(sd.spec, cfg.images_per_style, cfg.image_size, img_rng);
        quantize(sd.images);
        Rng split_rng(derive_seed(cfg.seed, streams::split, s));
        sd.split = split_membership(cfg.images_per_style, split_rng);
        data.styles.push_back(std::move(sd));
    }
    Rng corpus_rng(derive_seed(cfg.seed, streams::corpus));
    data.corpus = gen_corpus(cfg.corpus_size, cfg.image_size, corpus_rng);
    quantize(data.corpus);
    return data;
}

std::vector<Grid> model_space(const ExperimentConfig& cfg, const std::optional<AutoEncoder>& ae,
                              const std::vector<Grid>& images) {
    if (!cfg.autoencoder) return images;
    require(ae.has_value(), ErrorCode::missing_artifact, "latent models need a trained autoencoder");
    std::vector<Grid> out;
    out.reserve(images.size());
    for (const auto& g : images) out.push_back(ae->encode(g));
    return out;
}

AutoEncoder train_autoencoder_stage(const ExperimentConfig& cfg, const Dataset& data) {
    Rng rng(derive_seed(cfg.seed, streams::autoencoder));
    AutoEncoder ae({cfg.image_size, cfg.image_size}, {cfg.latent_side, cfg.latent_side}, rng);
    train_autoencoder(ae, data.corpus, cfg.autoencoder_epochs, cfg.autoencoder_lr, rng);
    return ae;
}

NoisePredictor pretrain_stage(const ExperimentConfig& cfg, const Dataset& data, const std::optional<AutoEncoder>& ae,
                              LossLog* log) {
    const auto corpus = model_space(cfg, ae, data.corpus);
    TrainConfig tc;
    tc.net.rows = corpus.front().rows();
    tc.net.cols = corpus.front().cols();
    tc.net.time_embed_dim = cfg.time_embed_dim;
    tc.net.T = cfg.T;
    tc.net.hidden = cfg.hidden;
    tc.net.latent = cfg.autoencoder;
    tc.net.beta_min = cfg.beta_min;
    tc.net.beta_max = cfg.beta_max;
    if (cfg.skip_term) {
        double sum = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (const auto& g : corpus) {
            for (double v : g.values()) {
                sum += v;
                sq += v * v;
            }
            n += g.size();
        }
        const double m = sum / static_cast<double>(n);
        tc.net.skip_std = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m));
    }
    tc.steps = cfg.pretrain_steps;
    tc.batch = cfg.pretrain_batch;
    tc.learning_rate = cfg.pretrain_lr;
    tc.seed = derive_seed(cfg.seed, streams::pretrain);
    return pretrain(corpus, cfg.schedule(), tc, log);
}

NoisePredictor finetune_stage(const ExperimentConfig& cfg, const Dataset& data, std::size_t style,
                              const NoisePredictor& pretrained, const std::optional<AutoEncoder>& ae, LossLog* log) {
    require(style < data.styles.size(), ErrorCode::invalid_argument, "finetune_stage: style out of range");
    const auto members = model_space(cfg, ae, data.styles[style].members());
    Rng rng(derive_seed(cfg.seed, streams::finetune, style));
    return finetune(pretrained, members, cfg.finetune, cfg.schedule(), rng, log);
}

Models train_models(const ExperimentConfig& cfg, const Dataset& data, int jobs) {
    Models m;
    if (cfg.autoencoder) m.autoencoder = train_autoencoder_stage(cfg, data);
    m.pretrained = pretrain_stage(cfg, data, m.autoencoder);
    m.finetuned.resize(data.styles.size());
    parallel_for(data.styles.size(), jobs,
                 [&](std::size_t s) { m.finetuned[s] = finetune_stage(cfg, data, s, m.pretrained, m.autoencoder); });
    return m;
}

MaskSpec mask_for(const ExperimentConfig& cfg, const Dataset& data, std::size_t style, std::size_t image) {
    MaskSpec spec = cfg.mask;
    if (cfg.mask_fill_auto) spec.fill = data.mean_intensity();
    spec.seed = derive_seed(cfg.seed, streams::mask, style * cfg.images_per_style + image);
    return spec;
}

PartialImage partial_for(const ExperimentConfig& cfg, const Dataset& data, std::size_t style, std::size_t image) {
    require(style < data.styles.size() && image < data.styles[style].images.size(), ErrorCode::invalid_argument,
            "partial_for: index out of range");
    return remove_partial(data.styles[style].images[image], mask_for(cfg, data, style, image));
}

double inversion_budget(const ExperimentConfig& cfg, const Dataset& data, const std::optional<AutoEncoder>& ae) {
    if (cfg.budget) return *cfg.budget;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < data.styles.size(); ++s) {
        for (std::size_t i = 0; i < data.styles[s].images.size(); ++i) {
            const Grid& x0 = data.styles[s].images[i];
            const Grid x_bar = partial_for(cfg, data, s, i).x_bar;
            sum += cfg.autoencoder ? l2_distance(ae.value().encode(x_bar), ae.value().encode(x0))
                                   : l2_distance(x_bar, x0);
            ++n;
        }
    }
    const double budget = sum / static_cast<double>(n);
    require(budget > 0.0, ErrorCode::numerical, "inversion_budget: mask removed nothing");
    return budget;
}

std::vector<ImageRef> image_refs(const Dataset& data, std::size_t max_styles) {
    std::vector<ImageRef> refs;
    const std::size_t n = max_styles == 0 ? data.styles.size() : std::min(max_styles, data.styles.size());
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < data.styles[s].images.size(); ++i) refs.push_back({s, i, data.styles[s].is_member(i)});
    }
    return refs;
}

namespace {

InversionConfig inversion_config(const ExperimentConfig& cfg, const Dataset& data, const ImageRef& ref,
                                 double budget) {
    InversionConfig ic;
    ic.steps = cfg.inversion_steps;
    ic.budget = budget;
    ic.step_len = budget * cfg.step_ratio;
    ic.t_lo = cfg.t_lo;
    ic.t_hi = cfg.t_hi;
    ic.keep_ct_coefficients = cfg.keep_ct;
    ic.seed = derive_seed(cfg.seed, streams::invert, ref.style * data.styles[ref.style].images.size() + ref.image);
    return ic;
}

}  // namespace

Recovered invert_image(const ExperimentConfig& cfg, const Dataset& data, const Models& models, const ImageRef& ref,
                       double budget) {
    require(ref.style < models.finetuned.size(), ErrorCode::missing_artifact, "no fine-tuned model for style");
    const NoiseSchedule sched = cfg.schedule();
    const PartialImage part = partial_for(cfg, data, ref.style, ref.image);
    const InversionConfig ic = inversion_config(cfg, data, ref, budget);
    const NoisePredictor& ft = models.finetuned[ref.style];
    InversionResult res;
    switch (cfg.inversion) {
        case InversionMethod::cgi: res = cgi_dm(models.pretrained, ft, part.x_bar, ic, sched); break;
        case InversionMethod::direct: res = direct_gi(ft, part.x_bar, ic, sched); break;
        case InversionMethod::latent:
            require(models.autoencoder.has_value(), ErrorCode::missing_artifact, "latent inversion needs an autoencoder");
            res = cgi_dm_latent(models.pretrained, ft, *models.autoencoder, part.x_bar, ic, sched);
            break;
    }
    return {ref, std::move(res.image), std::move(res.trace)};
}

std::vector<Recovered> invert_images(const ExperimentConfig& cfg, const Dataset& data, const Models& models,
                                     const std::vector<ImageRef>& refs, int jobs) {
    const double budget = inversion_budget(cfg, data, models.autoencoder);
    std::vector<Recovered> out(refs.size());
    parallel_for(refs.size(), jobs, [&](std::size_t k) { out[k] = invert_image(cfg, data, models, refs[k], budget); });
    return out;
}

std::vector<Grid> baseline_candidates(const ExperimentConfig& cfg, const Dataset& data, const Models& models,
                                      const ImageRef& ref) {
    require(!cfg.autoencoder, ErrorCode::invalid_argument, "baselines run on pixel-space models only");
    require(ref.style < models.finetuned.size(), ErrorCode::missing_artifact, "no fine-tuned model for style");
    const NoiseSchedule sched = cfg.schedule();
    const NoisePredictor& ft = models.finetuned[ref.style];
    const Grid& x0 = data.styles[ref.style].images[ref.image];
    Rng rng(derive_seed(cfg.seed, streams::baseline, ref.style * data.styles[ref.style].images.size() + ref.image));
    std::optional<PartialImage> part;
    if (cfg.baseline == BaselinePipeline::inpaint) part = partial_for(cfg, data, ref.style, ref.image);
    std::vector<Grid> out;
    for (int k = 0; k < cfg.baseline_k; ++k) {
        switch (cfg.baseline) {
            case BaselinePipeline::text2img: out.push_back(ddpm_sample(ft, sched, rng)); break;
            case BaselinePipeline::img2img: out.push_back(img2img(ft, x0, cfg.baseline_strength, sched, rng)); break;
            case BaselinePipeline::inpaint: out.push_back(inpaint(ft, x0, part->mask, sched, rng)); break;
        }
    }
    return out;
}

ScoreTable score_recovered(const Dataset& data, const std::vector<Recovered>& rec, SimilarityMetric metric) {
    ScoreTable table;
    table.metric = metric_name(metric);
    for (const auto& r : rec) {
        const Grid& x0 = data.styles.at(r.ref.style).images.at(r.ref.image);
        table.rows.push_back({static_cast<int>(r.ref.style), static_cast<int>(r.ref.image), r.ref.member,
                              similarity(metric, r.image, x0)});
    }
    return table;
}

ScoreTable score_candidates(const Dataset& data, const std::vector<ImageRef>& refs,
                            const std::vector<std::vector<Grid>>& candidates, SimilarityMetric metric) {
    require(refs.size() == candidates.size(), ErrorCode::shape_mismatch, "score_candidates: size mismatch");
    ScoreTable table;
    table.metric = metric_name(metric);
    for (std::size_t k = 0; k < refs.size(); ++k) {
        const Grid& x0 = data.styles.at(refs[k].style).images.at(refs[k].image);
        table.rows.push_back({static_cast<int>(refs[k].style), static_cast<int>(refs[k].image), refs[k].member,
                              best_of_k(x0, candidates[k], metric)});
    }
    return table;
}

Summary summarize(const ScoreTable& table) {
    Summary s;
    s.metric = table.metric;
    s.acc_universal = best_threshold_acc(table, ThresholdMode::universal).accuracy;
    s.acc_per_class = best_threshold_acc(table, ThresholdMode::per_class).accuracy;
    s.auc = auc(table.member_scores(), table.holdout_scores());
    return s;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace cgidm
