// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/harness.hpp"

#include <cstdio>

#include "cgidm/error.hpp"

namespace fs = std::filesystem;

namespace cgidm {

namespace {

std::string two(std::size_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02zu", v);
    return buf;
}

void say(const RunOptions& opts, const std::string& msg) {
    if (opts.log) opts.log(msg);
}

void check_hash(const std::string& found, const std::string& expected, const fs::path& what, const RunOptions& opts) {
    if (found == expected) return;
    const std::string msg = what.string() + " has config hash '" + found + "', expected '" + expected + "'";
    if (opts.force) {
        say(opts, "warning: " + msg + " (forced)");
        return;
    }
    fail(ErrorCode::hash_mismatch, msg + "; rerun the producing stage or pass --force");
}

CsvTable read_artifact_csv(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorCode::missing_artifact, "not found: " + path.string());
    return read_csv(path);
}

Grid read_artifact_pgm(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorCode::missing_artifact, "not found: " + path.string());
    return read_pgm(path);
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

CsvTable loss_csv(const std::vector<std::pair<std::size_t, LossLog>>& logs, bool with_style, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = with_style ? std::vector<std::string>{"style", "step", "loss"} : std::vector<std::string>{"step", "loss"};
    for (const auto& [style, log] : logs) {
        for (const auto& p : log) {
            std::vector<std::string> row;
            if (with_style) row.push_back(std::to_string(style));
            row.push_back(std::to_string(p.step));
            row.push_back(format_double(p.loss));
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

}  // namespace

fs::path Layout::style_image(std::size_t style, std::size_t image) const {
    return root / "data" / ("style_" + two(style)) / ("img_" + two(image) + ".pgm");
}

fs::path Layout::corpus_image(std::size_t index) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%05zu.pgm", index);
    return root / "data" / "corpus" / buf;
}

fs::path Layout::finetuned(std::size_t style) const { return root / "models" / ("finetuned_" + two(style) + ".ckpt"); }

fs::path Layout::partial_image(std::size_t style, std::size_t image) const {
    return root / "partial" / ("style_" + two(style)) / ("img_" + two(image) + ".pgm");
}

fs::path Layout::mask_image(std::size_t style, std::size_t image) const {
    return root / "partial" / ("style_" + two(style)) / ("img_" + two(image) + "_mask.pgm");
}

fs::path Layout::recovered_image(InversionMethod m, std::size_t style, std::size_t image) const {
    return recovered_dir(m) / ("style_" + two(style)) / ("img_" + two(image) + ".pgm");
}

fs::path Layout::baseline_image(BaselinePipeline p, std::size_t style, std::size_t image, int k) const {
    return baseline_dir(p) / ("style_" + two(style)) /
           ("img_" + two(image) + "_k" + two(static_cast<std::size_t>(k)) + ".pgm");
}

CsvTable summary_table(const std::vector<std::pair<std::string, Summary>>& rows, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = {"source", "metric", "acc_universal", "acc_per_class", "auc"};
    for (const auto& [source, s] : rows) {
        t.rows.push_back({source, s.metric, format_double(s.acc_universal), format_double(s.acc_per_class),
                          format_double(s.auc)});
    }
    return t;
}

CsvTable score_csv(const ScoreTable& table, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = {"class", "image", "is_member", "score"};
    for (const auto& r : table.rows) {
        t.rows.push_back(
            {std::to_string(r.cls), std::to_string(r.image), r.is_member ? "1" : "0", format_double(r.score)});
    }
    return t;
}

CsvTable mia_csv(const std::vector<MiaAucRow>& rows, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = {"method", "t", "auc"};
    for (const auto& r : rows) t.rows.push_back({mia_method_name(r.method), std::to_string(r.t), format_double(r.auc)});
    return t;
}

Dataset load_dataset(const ExperimentConfig& cfg, bool with_corpus, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const CsvTable split = read_artifact_csv(L.split_csv());
    check_hash(split.config_hash, stage_hash(cfg, Stage::data), L.split_csv(), opts);
    const auto cs = split.column("style"), ci = split.column("image"), cm = split.column("member"),
               cp = split.column("path");
    Dataset data;
    for (const auto& row : split.rows) {
        const std::size_t s = to_size(row[cs]), i = to_size(row[ci]);
        if (data.styles.size() <= s) data.styles.resize(s + 1);
        StyleData& sd = data.styles[s];
        require(sd.images.size() == i, ErrorCode::format, "split.csv rows must be ordered by style and image");
        sd.images.push_back(read_artifact_pgm(L.root / row[cp]));
        (row[cm] == "1" ? sd.split.members : sd.split.holdout).push_back(i);
    }
    require(!data.styles.empty(), ErrorCode::format, "split.csv lists no images");
    if (with_corpus) {
        for (std::size_t k = 0; k < cfg.corpus_size; ++k) data.corpus.push_back(read_artifact_pgm(L.corpus_image(k)));
    }
    return data;
}

Models load_models(const ExperimentConfig& cfg, std::size_t styles, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    Models m;
    std::string hash;
    auto need = [](const fs::path& p) {
        if (!fs::exists(p)) fail(ErrorCode::missing_artifact, "not found: " + p.string());
    };
    if (cfg.autoencoder) {
        need(L.autoencoder());
        m.autoencoder = load_autoencoder(L.autoencoder(), &hash);
        check_hash(hash, stage_hash(cfg, Stage::pretrain), L.autoencoder(), opts);
    }
    need(L.pretrained());
    m.pretrained = load_checkpoint(L.pretrained(), &hash);
    check_hash(hash, stage_hash(cfg, Stage::pretrain), L.pretrained(), opts);
    for (std::size_t s = 0; s < styles; ++s) {
        need(L.finetuned(s));
        m.finetuned.push_back(load_checkpoint(L.finetuned(s), &hash));
        check_hash(hash, stage_hash(cfg, Stage::finetune), L.finetuned(s), opts);
    }
    return m;
}

void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = generate_dataset(cfg);
    CsvTable split;
    split.config_hash = stage_hash(cfg, Stage::data);
    split.header = {"style", "image", "member", "kind", "path"};
    for (std::size_t s = 0; s < data.styles.size(); ++s) {
        const StyleData& sd = data.styles[s];
        for (std::size_t i = 0; i < sd.images.size(); ++i) {
            write_pgm(L.style_image(s, i), sd.images[i]);
            split.rows.push_back({std::to_string(s), std::to_string(i), sd.is_member(i) ? "1" : "0",
                                  style_kind_name(sd.spec.kind),
                                  L.style_image(s, i).lexically_relative(L.root).generic_string()});
        }
    }
    for (std::size_t k = 0; k < data.corpus.size(); ++k) write_pgm(L.corpus_image(k), data.corpus[k]);
    write_csv(L.split_csv(), split);
    say(opts, "gen-data: " + std::to_string(data.styles.size()) + " styles, " +
                  std::to_string(data.corpus.size()) + " corpus images");
}

void cmd_pretrain(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, true, opts);
    const std::string hash = stage_hash(cfg, Stage::pretrain);
    std::optional<AutoEncoder> ae;
    if (cfg.autoencoder) {
        ae = train_autoencoder_stage(cfg, data);
        save_autoencoder(L.autoencoder(), *ae, hash);
    }
    LossLog log;
    const NoisePredictor model = pretrain_stage(cfg, data, ae, &log);
    save_checkpoint(L.pretrained(), model, hash);
    write_csv(L.reports() / "pretrain_loss.csv", loss_csv({{0, log}}, false, hash));
    say(opts, "pretrain: final loss " + format_double(log.empty() ? 0.0 : log.back().loss));
}

void cmd_finetune(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, false, opts);
    Models m = load_models(cfg, 0, opts);
    const std::string hash = stage_hash(cfg, Stage::finetune);
    std::vector<std::pair<std::size_t, LossLog>> logs(data.styles.size());
    parallel_for(data.styles.size(), opts.jobs, [&](std::size_t s) {
        logs[s].first = s;
        const NoisePredictor ft = finetune_stage(cfg, data, s, m.pretrained, m.autoencoder, &logs[s].second);
        save_checkpoint(L.finetuned(s), ft, hash);
    });
    write_csv(L.reports() / "finetune_loss.csv", loss_csv(logs, true, hash));
    say(opts, "finetune: " + std::to_string(data.styles.size()) + " models");
}

void cmd_invert(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, false, opts);
    const Models models = load_models(cfg, data.styles.size(), opts);
    const auto refs = image_refs(data);
    const double budget = inversion_budget(cfg, data, models.autoencoder);
    std::vector<Recovered> rec(refs.size());
    parallel_for(refs.size(), opts.jobs, [&](std::size_t k) {
        const PartialImage partial = partial_for(cfg, data, refs[k].style, refs[k].image);
        write_pgm(L.partial_image(refs[k].style, refs[k].image), partial.x_bar);
        write_pgm(L.mask_image(refs[k].style, refs[k].image), partial.mask);
        rec[k] = invert_image(cfg, data, models, refs[k], budget);
        write_pgm(L.recovered_image(cfg.inversion, refs[k].style, refs[k].image), rec[k].image);
    });
    const std::string hash = stage_hash(cfg, Stage::invert);
    CsvTable index, trace;
    index.config_hash = trace.config_hash = hash;
    index.header = {"style", "image", "member", "budget"};
    trace.header = {"style", "image", "step", "t", "objective", "drift", "skipped"};
    for (const auto& r : rec) {
        const std::string s = std::to_string(r.ref.style), i = std::to_string(r.ref.image);
        index.rows.push_back({s, i, r.ref.member ? "1" : "0", format_double(budget)});
        for (const auto& row : r.trace) {
            trace.rows.push_back({s, i, std::to_string(row.step), std::to_string(row.t), format_double(row.objective),
                                  format_double(row.drift), row.skipped ? "1" : "0"});
        }
    }
    write_csv(L.recovered_dir(cfg.inversion) / "trace.csv", trace);
    write_csv(L.recovered_dir(cfg.inversion) / "index.csv", index);
    say(opts, "invert (" + inversion_method_name(cfg.inversion) + "): " + std::to_string(rec.size()) +
                  " images, budget " + format_double(budget));
}

void cmd_baseline(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, false, opts);
    const Models models = load_models(cfg, data.styles.size(), opts);
    const auto refs = image_refs(data);
    parallel_for(refs.size(), opts.jobs, [&](std::size_t k) {
        const auto cands = baseline_candidates(cfg, data, models, refs[k]);
        for (std::size_t j = 0; j < cands.size(); ++j) {
            write_pgm(L.baseline_image(cfg.baseline, refs[k].style, refs[k].image, static_cast<int>(j)), cands[j]);
        }
    });
    CsvTable index;
    index.config_hash = stage_hash(cfg, Stage::baseline);
    index.header = {"style", "image", "member", "k"};
    for (const auto& r : refs) {
        index.rows.push_back({std::to_string(r.style), std::to_string(r.image), r.member ? "1" : "0",
                              std::to_string(cfg.baseline_k)});
    }
    write_csv(L.baseline_dir(cfg.baseline) / "index.csv", index);
    say(opts, "baseline (" + baseline_pipeline_name(cfg.baseline) + "): " + std::to_string(refs.size()) + " x " +
                  std::to_string(cfg.baseline_k) + " generations");
}

void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, false, opts);
    const std::string hash = stage_hash(cfg, Stage::evaluate);

    const fs::path rec_index = L.recovered_dir(cfg.inversion) / "index.csv";
    const CsvTable rec_csv = read_artifact_csv(rec_index);
    check_hash(rec_csv.config_hash, stage_hash(cfg, Stage::invert), rec_index, opts);
    std::vector<Recovered> rec;
    for (const auto& row : rec_csv.rows) {
        ImageRef ref{to_size(row[0]), to_size(row[1]), row[2] == "1"};
        require(ref.style < data.styles.size() && ref.image < data.styles[ref.style].images.size() &&
                    ref.member == data.styles[ref.style].is_member(ref.image),
                ErrorCode::format, rec_index.string() + " disagrees with the dataset split");
        rec.push_back({ref, read_artifact_pgm(L.recovered_image(cfg.inversion, ref.style, ref.image)), {}});
    }

    std::vector<ImageRef> base_refs;
    std::vector<std::vector<Grid>> cands;
    const fs::path base_index = L.baseline_dir(cfg.baseline) / "index.csv";
    if (fs::exists(base_index)) {
        const CsvTable base_csv = read_csv(base_index);
        check_hash(base_csv.config_hash, stage_hash(cfg, Stage::baseline), base_index, opts);
        for (const auto& row : base_csv.rows) {
            ImageRef ref{to_size(row[0]), to_size(row[1]), row[2] == "1"};
            std::vector<Grid> c;
            for (int k = 0; k < std::stoi(row[3]); ++k) {
                c.push_back(read_artifact_pgm(L.baseline_image(cfg.baseline, ref.style, ref.image, k)));
            }
            base_refs.push_back(ref);
            cands.push_back(std::move(c));
        }
    }

    std::vector<std::pair<std::string, Summary>> summary;
    const std::string rec_name = inversion_method_name(cfg.inversion);
    const std::string base_name = baseline_pipeline_name(cfg.baseline);
    for (SimilarityMetric metric : cfg.metrics) {
        const ScoreTable t = score_recovered(data, rec, metric);
        write_csv(L.reports() / ("scores_" + rec_name + "_" + metric_name(metric) + ".csv"), score_csv(t, hash));
        summary.emplace_back(rec_name, summarize(t));
        if (!base_refs.empty()) {
            const ScoreTable b = score_candidates(data, base_refs, cands, metric);
            write_csv(L.reports() / ("scores_" + base_name + "_" + metric_name(metric) + ".csv"), score_csv(b, hash));
            summary.emplace_back(base_name, summarize(b));
        }
    }
    write_csv(L.reports() / "summary.csv", summary_table(summary, hash));
    for (const auto& [source, s] : summary) {
        say(opts, "evaluate: " + source + " " + s.metric + " acc=" + format_double(s.acc_universal) +
                      " acc_per_class=" + format_double(s.acc_per_class) + " auc=" + format_double(s.auc));
    }
}

void cmd_mia(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const Dataset data = load_dataset(cfg, false, opts);
    const Models models = load_models(cfg, data.styles.size(), opts);
    std::vector<std::vector<Grid>> mem(data.styles.size()), hol(data.styles.size());
    std::vector<MiaGroup> groups;
    for (std::size_t s = 0; s < data.styles.size(); ++s) {
        mem[s] = model_space(cfg, models.autoencoder, data.styles[s].members());
        hol[s] = model_space(cfg, models.autoencoder, data.styles[s].holdout());
        groups.push_back({&models.finetuned[s], mem[s], hol[s]});
    }
    const auto rows = mia_sweep_pooled(models.pretrained, groups, cfg.mia_t, cfg.mia_noise, cfg.schedule(),
                                       derive_seed(cfg.seed, streams::mia));
    write_csv(L.reports() / "mia.csv", mia_csv(rows, stage_hash(cfg, Stage::mia)));
    say(opts, "mia: " + std::to_string(rows.size()) + " rows");
}

void cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Layout L{cfg.out_dir};
    const std::string& axis = cfg.sweep_axis;
    require(axis == "train_steps" || axis == "num_images" || axis == "mask_kind" || axis == "extraction_steps",
            ErrorCode::config, "unknown sweep axis '" + axis + "'");
    const Dataset data = load_dataset(cfg, false, opts);
    const Models base = load_models(cfg, data.styles.size(), opts);
    CsvTable out;
    out.config_hash = stage_hash(cfg, Stage::sweep);
    out.header = {"axis", "value", "metric", "acc_universal", "acc_per_class", "auc"};
    for (const auto& value : cfg.sweep_values) {
        ExperimentConfig c = cfg;
        try {
            if (axis == "train_steps") c.finetune.steps_per_image = std::stoi(value);
            if (axis == "num_images") c.images_per_style = 2 * to_size(value);
            if (axis == "mask_kind") c.mask.kind = parse_mask_kind(value);
            if (axis == "extraction_steps") c.inversion_steps = std::stoi(value);
            validate(c);
        } catch (const std::exception& e) {
            fail(ErrorCode::config, "sweep value '" + value + "': " + e.what());
        }
        const Dataset d = axis == "num_images" ? generate_dataset(c) : data;
        Models m = base;
        const std::size_t n_styles = c.sweep_styles == 0 ? d.styles.size() : std::min(c.sweep_styles, d.styles.size());
        if (axis == "train_steps" || axis == "num_images") {
            parallel_for(n_styles, opts.jobs, [&](std::size_t s) {
                m.finetuned[s] = finetune_stage(c, d, s, base.pretrained, base.autoencoder);
            });
        }
        const auto rec = invert_images(c, d, m, image_refs(d, n_styles), opts.jobs);
        for (SimilarityMetric metric : c.metrics) {
            const Summary s = summarize(score_recovered(d, rec, metric));
            out.rows.push_back({axis, value, s.metric, format_double(s.acc_universal), format_double(s.acc_per_class),
                                format_double(s.auc)});
            say(opts, "sweep " + axis + "=" + value + " " + s.metric + " auc=" + format_double(s.auc));
        }
    }
    write_csv(L.reports() / ("sweep_" + axis + ".csv"), out);
}

void cmd_pipeline(const ExperimentConfig& cfg, const RunOptions& opts) {
    cmd_gen_data(cfg, opts);
    cmd_pretrain(cfg, opts);
    cmd_finetune(cfg, opts);
    cmd_invert(cfg, opts);
    if (!cfg.autoencoder) cmd_baseline(cfg, opts);
    cmd_evaluate(cfg, opts);
    cmd_mia(cfg, opts);
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"gen-data", "pretrain", "finetune", "invert", "baseline",
                                                "evaluate", "mia",      "sweep",    "pipeline"};
    return names;
}

void run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opts) {
    validate(cfg);
    if (name == "gen-data") return cmd_gen_data(cfg, opts);
    if (name == "pretrain") return cmd_pretrain(cfg, opts);
    if (name == "finetune") return cmd_finetune(cfg, opts);
    if (name == "invert") return cmd_invert(cfg, opts);
    if (name == "baseline") return cmd_baseline(cfg, opts);
    if (name == "evaluate") return cmd_evaluate(cfg, opts);
    if (name == "mia") return cmd_mia(cfg, opts);
    if (name == "sweep") return cmd_sweep(cfg, opts);
    if (name == "pipeline") return cmd_pipeline(cfg, opts);
    fail(ErrorCode::invalid_argument, "unknown command '" + name + "'");
}

}  // namespace cgidm
