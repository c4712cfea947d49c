// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgidm/defense.hpp"
#include "cgidm/diffusion.hpp"
#include "cgidm/masking.hpp"
#include "cgidm/metrics.hpp"

namespace cgidm {

/// Flat `key = value` text. `[name]` opens a section; keys are stored as
/// "section.key". `#` and `;` start comments. Later duplicates are errors.
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& source = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    int line_of(const std::string& key) const;
    const std::string& source() const noexcept { return source_; }
    std::vector<std::string> keys() const;
    void set(const std::string& key, const std::string& value);

private:
    std::string source_;
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
};

enum class InversionMethod { cgi, direct, latent };
enum class BaselinePipeline { text2img, img2img, inpaint };

std::string inversion_method_name(InversionMethod m);
InversionMethod parse_inversion_method(const std::string& name);
std::string baseline_pipeline_name(BaselinePipeline p);
BaselinePipeline parse_baseline_pipeline(const std::string& name);
std::string finetune_mode_name(FinetuneMode m);
FinetuneMode parse_finetune_mode(const std::string& name);

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t image_size = 32;
    int T = 100;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    std::filesystem::path out_dir = "cgidm_out";

    // data
    std::size_t styles = 5;
    std::size_t images_per_style = 20;
    std::size_t corpus_size = 2000;

    // pretrain
    int pretrain_steps = 16000;
    std::size_t pretrain_batch = 8;
    double pretrain_lr = 1e-3;
    std::vector<std::size_t> hidden{256, 256};
    std::size_t time_embed_dim = 16;
    /// Use the linear skip term with the corpus pixel std.
    bool skip_term = true;

    // autoencoder; when enabled every diffusion model works on latents
    bool autoencoder = false;
    std::size_t latent_side = 16;
    int autoencoder_epochs = 300;
    double autoencoder_lr = 1e-2;

    FinetuneSpec finetune;
    MaskSpec mask;
    /// Mask fill is the dataset mean intensity unless set explicitly.
    bool mask_fill_auto = true;

    InversionMethod inversion = InversionMethod::cgi;
    int inversion_steps = 1000;
    /// Step length as a fraction of the budget.
    double step_ratio = 2.0 / 70.0;
    /// Budget; unset means mean ||x_bar - x0|| over the dataset.
    std::optional<double> budget;
    int t_lo = 1;
    int t_hi = 0;
    bool keep_ct = false;

    BaselinePipeline baseline = BaselinePipeline::img2img;
    int baseline_k = 16;
    double baseline_strength = 0.7;

    std::vector<SimilarityMetric> metrics{SimilarityMetric::cosine, SimilarityMetric::ssim};

    std::vector<int> mia_t{10, 30, 50, 70, 90};
    int mia_noise = 8;

    std::string sweep_axis = "extraction_steps";
    std::vector<std::string> sweep_values{"50", "200", "1000"};
    /// Styles used by sweeps; 0 means all.
    std::size_t sweep_styles = 0;

    NoiseSchedule schedule() const { return build_schedule(T, beta_min, beta_max); }
};

/// Missing keys keep their defaults. Unknown keys and bad values throw
/// ErrorCode::config with "source:line:".
ExperimentConfig parse_experiment(const ConfigFile& file);
ExperimentConfig load_experiment(const std::filesystem::path& path);
void validate(const ExperimentConfig& cfg);

/// Every knob as `key = value` lines in a fixed order; out_dir is excluded.
std::string canonical_text(const ExperimentConfig& cfg);
/// FNV-1a 64 of canonical_text, 16 lowercase hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::string fnv1a_hex(const std::string& bytes);

/// Pipeline stages. An artifact records the hash of the stage that wrote it;
/// a stage hash covers only the sections that stage depends on, including
/// those of its upstream stages.
enum class Stage { data, pretrain, finetune, invert, baseline, evaluate, mia, sweep };

std::string stage_name(Stage s);
std::string stage_hash(const ExperimentConfig& cfg, Stage stage);

}  // namespace cgidm
