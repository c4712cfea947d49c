// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "cgidm/error.hpp"
#include "cgidm/io.hpp"

namespace cgidm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
    return out;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
    ConfigFile cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    auto error = [&](const std::string& msg) {
        fail(ErrorCode::config, source + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        const auto comment = raw.find_first_of("#;");
        const std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) error("malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) error("expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) error("empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values_.count(full)) error("duplicate key '" + full + "'");
        cfg.values_[full] = trim(line.substr(eq + 1));
        cfg.lines_[full] = line_no;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::missing_artifact, "config file not found: " + path.string());
    return parse(read_file(path), path.string());
}

const std::string& ConfigFile::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::config, source_ + ": missing key '" + key + "'");
    return it->second;
}

int ConfigFile::line_of(const std::string& key) const {
    const auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
}

std::vector<std::string> ConfigFile::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
}

void ConfigFile::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string inversion_method_name(InversionMethod m) {
    switch (m) {
        case InversionMethod::cgi: return "cgi";
        case InversionMethod::direct: return "direct";
        case InversionMethod::latent: return "latent";
    }
    return "?";
}

InversionMethod parse_inversion_method(const std::string& name) {
    if (name == "cgi") return InversionMethod::cgi;
    if (name == "direct") return InversionMethod::direct;
    if (name == "latent") return InversionMethod::latent;
    fail(ErrorCode::invalid_argument, "unknown inversion method '" + name + "'");
}

std::string baseline_pipeline_name(BaselinePipeline p) {
    switch (p) {
        case BaselinePipeline::text2img: return "text2img";
        case BaselinePipeline::img2img: return "img2img";
        case BaselinePipeline::inpaint: return "inpaint";
    }
    return "?";
}

BaselinePipeline parse_baseline_pipeline(const std::string& name) {
    if (name == "text2img") return BaselinePipeline::text2img;
    if (name == "img2img") return BaselinePipeline::img2img;
    if (name == "inpaint") return BaselinePipeline::inpaint;
    fail(ErrorCode::invalid_argument, "unknown baseline pipeline '" + name + "'");
}

std::string finetune_mode_name(FinetuneMode m) {
    switch (m) {
        case FinetuneMode::full_no_prior: return "full_no_prior";
        case FinetuneMode::full_with_prior: return "full_with_prior";
        case FinetuneMode::lora: return "lora";
    }
    return "?";
}

FinetuneMode parse_finetune_mode(const std::string& name) {
    if (name == "full_no_prior") return FinetuneMode::full_no_prior;
    if (name == "full_with_prior") return FinetuneMode::full_with_prior;
    if (name == "lora") return FinetuneMode::lora;
    fail(ErrorCode::invalid_argument, "unknown fine-tune mode '" + name + "'");
}

namespace {

class Reader {
public:
    explicit Reader(const ConfigFile& file) : file_(file) {}

    // Runs `apply` on the value of `key` when present. Any exception is
    // rethrown as a config error citing the line.
    void read(const std::string& key, const std::function<void(const std::string&)>& apply) {
        used_.push_back(key);
        if (!file_.has(key)) return;
        try {
            apply(file_.get(key));
        } catch (const std::exception& e) {
            fail(ErrorCode::config, where(key) + "bad value for '" + key + "': " + e.what());
        }
    }

    void finish() const {
        for (const auto& key : file_.keys()) {
            if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
                fail(ErrorCode::config, where(key) + "unknown key '" + key + "'");
            }
        }
    }

private:
    std::string where(const std::string& key) const {
        return file_.source() + ":" + std::to_string(file_.line_of(key)) + ": ";
    }

    const ConfigFile& file_;
    std::vector<std::string> used_;
};

template <typename T>
T parse_number(const std::string& s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("not a boolean: '" + s + "'");
}

}  // namespace

ExperimentConfig parse_experiment(const ConfigFile& file) {
    ExperimentConfig c;
    Reader r(file);
    auto num = [](auto& field) {
        return [&field](const std::string& s) { field = parse_number<std::remove_reference_t<decltype(field)>>(s); };
    };
    auto flag = [](bool& field) { return [&field](const std::string& s) { field = parse_bool(s); }; };

    r.read("experiment.seed", num(c.seed));
    r.read("experiment.image_size", num(c.image_size));
    r.read("experiment.T", num(c.T));
    r.read("experiment.beta_min", num(c.beta_min));
    r.read("experiment.beta_max", num(c.beta_max));
    r.read("experiment.out_dir", [&](const std::string& s) { c.out_dir = s; });

    r.read("data.styles", num(c.styles));
    r.read("data.images_per_style", num(c.images_per_style));
    r.read("data.corpus_size", num(c.corpus_size));

    r.read("pretrain.steps", num(c.pretrain_steps));
    r.read("pretrain.batch", num(c.pretrain_batch));
    r.read("pretrain.learning_rate", num(c.pretrain_lr));
    r.read("pretrain.hidden", [&](const std::string& s) {
        c.hidden.clear();
        for (const auto& h : split_list(s)) c.hidden.push_back(parse_number<std::size_t>(h));
    });
    r.read("pretrain.time_embed_dim", num(c.time_embed_dim));
    r.read("pretrain.skip_term", flag(c.skip_term));

    r.read("autoencoder.enabled", flag(c.autoencoder));
    r.read("autoencoder.latent_side", num(c.latent_side));
    r.read("autoencoder.epochs", num(c.autoencoder_epochs));
    r.read("autoencoder.learning_rate", num(c.autoencoder_lr));

    FinetuneSpec& f = c.finetune;
    r.read("finetune.mode", [&](const std::string& s) { f.mode = parse_finetune_mode(s); });
    r.read("finetune.steps_per_image", num(f.steps_per_image));
    r.read("finetune.learning_rate", num(f.learning_rate));
    r.read("finetune.batch", num(f.batch));
    r.read("finetune.prior_weight", num(f.prior_weight));
    r.read("finetune.prior_set_size", [&](const std::string& s) {
        if (s == "auto") f.prior_set_size.reset();
        else f.prior_set_size = parse_number<std::size_t>(s);
    });
    r.read("finetune.lora_rank", num(f.lora_rank));
    r.read("finetune.lora_scale", num(f.lora_scale));
    r.read("finetune.defenses", [&](const std::string& s) {
        f.augmentations.clear();
        for (const auto& d : split_list(s)) {
            if (d != "none") f.augmentations.push_back(parse_defense(d));
        }
    });

    MaskSpec& m = c.mask;
    r.read("mask.kind", [&](const std::string& s) { m.kind = parse_mask_kind(s); });
    r.read("mask.block", num(m.block));
    r.read("mask.fraction", num(m.fraction));
    r.read("mask.fill", [&](const std::string& s) {
        c.mask_fill_auto = s == "auto";
        if (!c.mask_fill_auto) m.fill = parse_number<double>(s);
    });
    r.read("mask.blur_kernel", num(m.blur_kernel));
    r.read("mask.blur_sigma", num(m.blur_sigma));
    r.read("mask.selection", [&](const std::string& s) {
        if (s == "random") m.selection = BlockSelection::random;
        else if (s == "checkerboard") m.selection = BlockSelection::checkerboard;
        else throw std::invalid_argument("expected random or checkerboard");
    });

    r.read("inversion.method", [&](const std::string& s) { c.inversion = parse_inversion_method(s); });
    r.read("inversion.steps", num(c.inversion_steps));
    r.read("inversion.step_ratio", num(c.step_ratio));
    r.read("inversion.budget", [&](const std::string& s) {
        if (s == "auto") c.budget.reset();
        else c.budget = parse_number<double>(s);
    });
    r.read("inversion.t_lo", num(c.t_lo));
    r.read("inversion.t_hi", num(c.t_hi));
    r.read("inversion.keep_ct", flag(c.keep_ct));

    r.read("baseline.pipeline", [&](const std::string& s) { c.baseline = parse_baseline_pipeline(s); });
    r.read("baseline.k", num(c.baseline_k));
    r.read("baseline.strength", num(c.baseline_strength));

    r.read("evaluate.metrics", [&](const std::string& s) {
        c.metrics.clear();
        for (const auto& name : split_list(s)) c.metrics.push_back(parse_metric(name));
    });

    r.read("mia.t", [&](const std::string& s) {
        c.mia_t.clear();
        for (const auto& t : split_list(s)) c.mia_t.push_back(parse_number<int>(t));
    });
    r.read("mia.n_noise", num(c.mia_noise));

    r.read("sweep.axis", [&](const std::string& s) { c.sweep_axis = s; });
    r.read("sweep.values", [&](const std::string& s) { c.sweep_values = split_list(s); });
    r.read("sweep.styles", num(c.sweep_styles));

    r.finish();
    try {
        validate(c);
    } catch (const Error& e) {
        fail(ErrorCode::config, file.source() + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) { return parse_experiment(ConfigFile::load(path)); }

void validate(const ExperimentConfig& c) {
    auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCode::config, msg); };
    check(c.image_size >= 8 && c.image_size % 8 == 0, "image_size must be a positive multiple of 8");
    check(c.T >= 2, "T must be >= 2");
    check(c.beta_min > 0.0 && c.beta_min <= c.beta_max && c.beta_max < 1.0, "need 0 < beta_min <= beta_max < 1");
    check(c.styles >= 1, "styles must be >= 1");
    check(c.images_per_style >= 2, "images_per_style must be >= 2");
    check(c.corpus_size >= 1, "corpus_size must be >= 1");
    check(c.pretrain_steps >= 1 && c.pretrain_batch >= 1 && c.pretrain_lr > 0.0, "invalid pretrain settings");
    check(!c.hidden.empty(), "pretrain.hidden must list at least one width");
    check(c.time_embed_dim >= 2 && c.time_embed_dim % 2 == 0, "time_embed_dim must be even");
    check(!c.autoencoder || (c.latent_side >= 1 && c.autoencoder_epochs >= 1), "invalid autoencoder settings");
    check(c.finetune.steps_per_image >= 0 && c.finetune.batch >= 1 && c.finetune.learning_rate > 0.0,
          "invalid fine-tune settings");
    check(c.mask.fraction >= 0.0 && c.mask.fraction <= 1.0 && c.mask.block >= 1, "invalid mask settings");
    check(c.inversion_steps >= 0 && c.step_ratio > 0.0, "invalid inversion settings");
    check(!c.budget || *c.budget > 0.0, "budget must be positive");
    check(c.t_lo >= 1 && c.t_lo <= c.T && c.t_hi >= 0 && c.t_hi <= c.T && (c.t_hi == 0 || c.t_hi >= c.t_lo),
          "invalid inversion t range");
    check((c.inversion == InversionMethod::latent) == c.autoencoder,
          "inversion.method = latent requires autoencoder.enabled = true and vice versa");
    check(c.baseline_k >= 1 && c.baseline_strength > 0.0 && c.baseline_strength <= 1.0, "invalid baseline settings");
    check(!c.metrics.empty(), "evaluate.metrics must name at least one metric");
    check(!c.mia_t.empty() && c.mia_noise >= 1, "invalid mia settings");
    for (int t : c.mia_t) check(t >= 1 && t <= c.T, "mia.t entries must lie in [1, T]");
    check(!c.sweep_values.empty(), "sweep.values must not be empty");
}

std::string canonical_text(const ExperimentConfig& c) {
    std::string out;
    auto put = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    auto num = [](auto v) {
        if constexpr (std::is_floating_point_v<decltype(v)>) return format_double(v);
        else return std::to_string(v);
    };
    put("experiment.seed", num(c.seed));
    put("experiment.image_size", num(c.image_size));
    put("experiment.T", num(c.T));
    put("experiment.beta_min", num(c.beta_min));
    put("experiment.beta_max", num(c.beta_max));
    put("data.styles", num(c.styles));
    put("data.images_per_style", num(c.images_per_style));
    put("data.corpus_size", num(c.corpus_size));
    put("pretrain.steps", num(c.pretrain_steps));
    put("pretrain.batch", num(c.pretrain_batch));
    put("pretrain.learning_rate", num(c.pretrain_lr));
    put("pretrain.hidden", join<std::size_t>(c.hidden, [](const std::size_t& h) { return std::to_string(h); }));
    put("pretrain.time_embed_dim", num(c.time_embed_dim));
    put("pretrain.skip_term", c.skip_term ? "true" : "false");
    put("autoencoder.enabled", c.autoencoder ? "true" : "false");
    put("autoencoder.latent_side", num(c.latent_side));
    put("autoencoder.epochs", num(c.autoencoder_epochs));
    put("autoencoder.learning_rate", num(c.autoencoder_lr));
    const FinetuneSpec& f = c.finetune;
    put("finetune.mode", finetune_mode_name(f.mode));
    put("finetune.steps_per_image", num(f.steps_per_image));
    put("finetune.learning_rate", num(f.learning_rate));
    put("finetune.batch", num(f.batch));
    put("finetune.prior_weight", num(f.prior_weight));
    put("finetune.prior_set_size", f.prior_set_size ? num(*f.prior_set_size) : "auto");
    put("finetune.lora_rank", num(f.lora_rank));
    put("finetune.lora_scale", num(f.lora_scale));
    put("finetune.defenses",
        f.augmentations.empty() ? "none" : join<DefenseKind>(f.augmentations, [](const DefenseKind& d) {
            return defense_name(d);
        }));
    const MaskSpec& m = c.mask;
    put("mask.kind", mask_kind_name(m.kind));
    put("mask.block", num(m.block));
    put("mask.fraction", num(m.fraction));
    put("mask.fill", c.mask_fill_auto ? "auto" : num(m.fill));
    put("mask.blur_kernel", num(m.blur_kernel));
    put("mask.blur_sigma", num(m.blur_sigma));
    put("mask.selection", m.selection == BlockSelection::random ? "random" : "checkerboard");
    put("inversion.method", inversion_method_name(c.inversion));
    put("inversion.steps", num(c.inversion_steps));
    put("inversion.step_ratio", num(c.step_ratio));
    put("inversion.budget", c.budget ? num(*c.budget) : "auto");
    put("inversion.t_lo", num(c.t_lo));
    put("inversion.t_hi", num(c.t_hi));
    put("inversion.keep_ct", c.keep_ct ? "true" : "false");
    put("baseline.pipeline", baseline_pipeline_name(c.baseline));
    put("baseline.k", num(c.baseline_k));
    put("baseline.strength", num(c.baseline_strength));
    put("evaluate.metrics",
        join<SimilarityMetric>(c.metrics, [](const SimilarityMetric& s) { return metric_name(s); }));
    put("mia.t", join<int>(c.mia_t, [](const int& t) { return std::to_string(t); }));
    put("mia.n_noise", num(c.mia_noise));
    put("sweep.axis", c.sweep_axis);
    put("sweep.values", join<std::string>(c.sweep_values, [](const std::string& s) { return s; }));
    put("sweep.styles", num(c.sweep_styles));
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(canonical_text(cfg)); }

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::data: return "data";
        case Stage::pretrain: return "pretrain";
        case Stage::finetune: return "finetune";
        case Stage::invert: return "invert";
        case Stage::baseline: return "baseline";
        case Stage::evaluate: return "evaluate";
        case Stage::mia: return "mia";
        case Stage::sweep: return "sweep";
    }
    return "?";
}

namespace {

std::vector<std::string> stage_sections(Stage stage) {
    std::vector<std::string> base{"experiment", "data"};
    auto with = [&base](std::initializer_list<const char*> more) {
        for (const char* m : more) base.emplace_back(m);
        return base;
    };
    switch (stage) {
        case Stage::data: return base;
        case Stage::pretrain: return with({"pretrain", "autoencoder"});
        case Stage::finetune: return with({"pretrain", "autoencoder", "finetune"});
        case Stage::invert: return with({"pretrain", "autoencoder", "finetune", "mask", "inversion"});
        case Stage::baseline: return with({"pretrain", "autoencoder", "finetune", "mask", "baseline"});
        case Stage::evaluate:
            return with({"pretrain", "autoencoder", "finetune", "mask", "inversion", "baseline", "evaluate"});
        case Stage::mia: return with({"pretrain", "autoencoder", "finetune", "mia"});
        case Stage::sweep: return {};
    }
    return {};
}

}  // namespace

std::string stage_hash(const ExperimentConfig& cfg, Stage stage) {
    const auto sections = stage_sections(stage);
    if (sections.empty()) return config_hash(cfg);
    std::istringstream in(canonical_text(cfg));
    std::string line, kept;
    while (std::getline(in, line)) {
        const std::string section = line.substr(0, line.find('.'));
        if (std::find(sections.begin(), sections.end(), section) != sections.end()) kept += line + "\n";
    }
    return fnv1a_hex(kept);
}

}  // namespace cgidm
