// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through cgidm.h.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgidm/cgidm.h"

namespace {

struct ConfigHandle {
    cgidm_config* ptr = nullptr;
    ~ConfigHandle() { cgidm_config_free(ptr); }
};

int report(cgidm_status st) {
    if (st != CGIDM_OK) std::fprintf(stderr, "cgidm: %s: %s\n", cgidm_status_string(st), cgidm_last_error());
    return static_cast<int>(st);
}

void print_log(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrasting gradient inversion lab for diffusion models"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed = -1;
    std::string out_dir;
    int jobs = 1;
    bool force = false;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "Experiment config file (key = value with [sections])");
    app.add_option("--seed", seed, "Override experiment.seed")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out_dir, "Override experiment.out_dir");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--force", force, "Accept artifacts written under a different config hash");
    app.add_option("--set", overrides, "Override any key, e.g. --set inversion.steps=200");

    std::string method, pipeline, axis;
    for (const auto& name : {"gen-data", "pretrain", "finetune", "evaluate", "mia", "pipeline"}) {
        app.add_subcommand(name, std::string("Run the ") + name + " stage");
    }
    app.add_subcommand("invert", "Recover images by inversion")
        ->add_option("--method", method, "cgi, direct or latent");
    app.add_subcommand("baseline", "Generate K candidates per input")
        ->add_option("--pipeline", pipeline, "text2img, img2img or inpaint");
    app.add_subcommand("sweep", "Run an ablation sweep")
        ->add_option("--axis", axis, "train_steps, num_images, mask_kind or extraction_steps");
    app.add_subcommand("config", "Print the resolved config and its hash");

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    ConfigHandle cfg;
    cgidm_status st = config_path.empty() ? cgidm_config_default(&cfg.ptr) : cgidm_config_load(config_path.c_str(), &cfg.ptr);
    if (st != CGIDM_OK) return report(st);

    std::vector<std::pair<std::string, std::string>> sets;
    if (seed >= 0) sets.emplace_back("experiment.seed", std::to_string(seed));
    if (!out_dir.empty()) sets.emplace_back("experiment.out_dir", out_dir);
    if (!method.empty()) sets.emplace_back("inversion.method", method);
    if (!pipeline.empty()) sets.emplace_back("baseline.pipeline", pipeline);
    if (!axis.empty()) sets.emplace_back("sweep.axis", axis);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "cgidm: --set expects key=value, got '%s'\n", o.c_str());
            return static_cast<int>(CGIDM_INVALID_ARGUMENT);
        }
        sets.emplace_back(o.substr(0, eq), o.substr(eq + 1));
    }
    std::vector<const char*> keys, values;
    for (const auto& [key, value] : sets) {
        keys.push_back(key.c_str());
        values.push_back(value.c_str());
    }
    st = cgidm_config_set_many(cfg.ptr, keys.data(), values.data(), keys.size());
    if (st != CGIDM_OK) return report(st);

    if (command == "config") {
        size_t len = 0;
        if ((st = cgidm_config_text(cfg.ptr, nullptr, &len)) != CGIDM_OK) return report(st);
        std::string text(len, '\0');
        if ((st = cgidm_config_text(cfg.ptr, text.data(), &len)) != CGIDM_OK) return report(st);
        char hash[17];
        if ((st = cgidm_config_hash(cfg.ptr, hash, sizeof hash)) != CGIDM_OK) return report(st);
        std::printf("%s# config_hash=%s\n", text.c_str(), hash);
        return 0;
    }

    cgidm_run_options opts{jobs, force ? 1 : 0, print_log, nullptr};
    return report(cgidm_run(cfg.ptr, command.c_str(), &opts));
}
