// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cgidm/config.hpp"
#include "cgidm/experiment.hpp"
#include "cgidm/io.hpp"
#include "cgidm/mia.hpp"

namespace cgidm {

struct RunOptions {
    int jobs = 1;
    /// Accept upstream artifacts whose recorded hash differs from the config.
    bool force = false;
    std::function<void(const std::string&)> log;
};

/// Paths under cfg.out_dir.
///   data/split.csv (style, image, member, kind, path relative to root),
///   data/style_SS/img_II.pgm, data/corpus/img_NNNNN.pgm
///   models/pretrained.ckpt, models/autoencoder.ckpt, models/finetuned_SS.ckpt
///   partial/style_SS/{img_II.pgm, img_II_mask.pgm}
///   recovered/<method>/{index.csv, trace.csv, style_SS/img_II.pgm}
///   baseline/<pipeline>/{index.csv, style_SS/img_II_kKK.pgm}
///   reports/*.csv
struct Layout {
    std::filesystem::path root;
    std::filesystem::path split_csv() const { return root / "data" / "split.csv"; }
    std::filesystem::path style_image(std::size_t style, std::size_t image) const;
    std::filesystem::path corpus_image(std::size_t index) const;
    std::filesystem::path pretrained() const { return root / "models" / "pretrained.ckpt"; }
    std::filesystem::path autoencoder() const { return root / "models" / "autoencoder.ckpt"; }
    std::filesystem::path finetuned(std::size_t style) const;
    /// x_bar and its mask (1 = removed), written by invert for audit.
    std::filesystem::path partial_image(std::size_t style, std::size_t image) const;
    std::filesystem::path mask_image(std::size_t style, std::size_t image) const;
    std::filesystem::path recovered_dir(InversionMethod m) const { return root / "recovered" / inversion_method_name(m); }
    std::filesystem::path recovered_image(InversionMethod m, std::size_t style, std::size_t image) const;
    std::filesystem::path baseline_dir(BaselinePipeline p) const { return root / "baseline" / baseline_pipeline_name(p); }
    std::filesystem::path baseline_image(BaselinePipeline p, std::size_t style, std::size_t image, int k) const;
    std::filesystem::path reports() const { return root / "reports"; }
};

/// Reads the dataset written by cmd_gen_data. The corpus is loaded only when
/// asked for. Throws missing_artifact naming the first absent file.
Dataset load_dataset(const ExperimentConfig& cfg, bool with_corpus, const RunOptions& opts);
Models load_models(const ExperimentConfig& cfg, std::size_t styles, const RunOptions& opts);

void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_pretrain(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_finetune(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_invert(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_baseline(const ExperimentConfig& cfg, const RunOptions& opts);
/// Scores the configured inversion method and, when present, the configured
/// baseline. Refuses artifacts from other configurations unless forced.
void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_mia(const ExperimentConfig& cfg, const RunOptions& opts);
/// Axis from cfg.sweep_axis: train_steps (steps per image), num_images
/// (members per style), mask_kind, extraction_steps.
void cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
/// gen-data, pretrain, finetune, invert, baseline, evaluate, mia.
void cmd_pipeline(const ExperimentConfig& cfg, const RunOptions& opts);

const std::vector<std::string>& command_names();
/// Dispatch by command name ("gen-data", "pretrain", ...).
void run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opts);

/// Summary rows in the format of reports/summary.csv.
CsvTable summary_table(const std::vector<std::pair<std::string, Summary>>& rows, const std::string& hash);
CsvTable score_csv(const ScoreTable& table, const std::string& hash);
CsvTable mia_csv(const std::vector<MiaAucRow>& rows, const std::string& hash);

}  // namespace cgidm
