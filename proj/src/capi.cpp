// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/cgidm.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "cgidm/config.hpp"
#include "cgidm/error.hpp"
#include "cgidm/harness.hpp"
#include "cgidm/io.hpp"
#include "cgidm/metrics.hpp"
#include "cgidm/net.hpp"

struct cgidm_config {
    cgidm::ExperimentConfig cfg;
};

struct cgidm_model {
    cgidm::NoisePredictor model;
    std::string hash;
};

struct cgidm_image {
    cgidm::Grid grid;
};

namespace {

thread_local std::string g_last_error;

cgidm_status to_status(cgidm::ErrorCode code) {
    return static_cast<cgidm_status>(static_cast<int>(code));
}

template <typename F>
cgidm_status guarded(F&& f) {
    try {
        g_last_error.clear();
        f();
        return CGIDM_OK;
    } catch (const cgidm::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CGIDM_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CGIDM_INTERNAL;
    } catch (...) {
        g_last_error = "unknown exception";
        return CGIDM_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    cgidm::require(p != nullptr, cgidm::ErrorCode::invalid_argument, std::string(what) + " is null");
}

// Canonical text keeps everything except out_dir; re-add it so overrides
// round-trip through the parser.
cgidm::ConfigFile as_file(const cgidm::ExperimentConfig& cfg) {
    cgidm::ConfigFile f = cgidm::ConfigFile::parse(cgidm::canonical_text(cfg), "<config>");
    f.set("experiment.out_dir", cfg.out_dir.string());
    return f;
}

}  // namespace

extern "C" {

const char* cgidm_version(void) { return "0.1.0"; }

const char* cgidm_last_error(void) { return g_last_error.c_str(); }

const char* cgidm_status_string(cgidm_status status) {
    switch (status) {
        case CGIDM_OK: return "ok";
        case CGIDM_INVALID_ARGUMENT: return "invalid argument";
        case CGIDM_SHAPE_MISMATCH: return "shape mismatch";
        case CGIDM_NUMERICAL: return "numerical error";
        case CGIDM_IO: return "i/o error";
        case CGIDM_FORMAT: return "format error";
        case CGIDM_CONFIG: return "config error";
        case CGIDM_MISSING_ARTIFACT: return "missing artifact";
        case CGIDM_HASH_MISMATCH: return "config hash mismatch";
        case CGIDM_INTERNAL: return "internal error";
    }
    return "unknown status";
}

cgidm_status cgidm_config_default(cgidm_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new cgidm_config{};
    });
}

cgidm_status cgidm_config_load(const char* path, cgidm_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new cgidm_config{cgidm::load_experiment(path)};
    });
}

cgidm_status cgidm_config_parse(const char* text, cgidm_config** out) {
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = new cgidm_config{cgidm::parse_experiment(cgidm::ConfigFile::parse(text))};
    });
}

cgidm_status cgidm_config_set(cgidm_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        need(cfg, "cfg");
        need(key, "key");
        need(value, "value");
        cgidm::ConfigFile f = as_file(cfg->cfg);
        f.set(key, value);
        cfg->cfg = cgidm::parse_experiment(f);
    });
}

cgidm_status cgidm_config_set_many(cgidm_config* cfg, const char* const* keys, const char* const* values, size_t n) {
    return guarded([&] {
        need(cfg, "cfg");
        cgidm::require(n == 0 || (keys != nullptr && values != nullptr), cgidm::ErrorCode::invalid_argument,
                       "keys and values must not be null");
        cgidm::ConfigFile f = as_file(cfg->cfg);
        for (size_t i = 0; i < n; ++i) {
            need(keys[i], "key");
            need(values[i], "value");
            f.set(keys[i], values[i]);
        }
        cfg->cfg = cgidm::parse_experiment(f);
    });
}

cgidm_status cgidm_config_text(const cgidm_config* cfg, char* buf, size_t* len) {
    return guarded([&] {
        need(cfg, "cfg");
        need(len, "len");
        const std::string text = cgidm::canonical_text(cfg->cfg);
        const size_t cap = *len;
        *len = text.size() + 1;
        if (buf == nullptr) return;
        cgidm::require(cap >= text.size() + 1, cgidm::ErrorCode::invalid_argument, "buffer too small");
        std::memcpy(buf, text.c_str(), text.size() + 1);
    });
}

cgidm_status cgidm_config_hash(const cgidm_config* cfg, char* buf, size_t buf_len) {
    return guarded([&] {
        need(cfg, "cfg");
        need(buf, "buf");
        const std::string h = cgidm::config_hash(cfg->cfg);
        cgidm::require(buf_len >= h.size() + 1, cgidm::ErrorCode::invalid_argument, "buffer too small");
        std::memcpy(buf, h.c_str(), h.size() + 1);
    });
}

void cgidm_config_free(cgidm_config* cfg) { delete cfg; }

size_t cgidm_command_count(void) { return cgidm::command_names().size(); }

const char* cgidm_command_name(size_t index) {
    const auto& names = cgidm::command_names();
    return index < names.size() ? names[index].c_str() : nullptr;
}

cgidm_status cgidm_run(const cgidm_config* cfg, const char* command, const cgidm_run_options* opts) {
    return guarded([&] {
        need(cfg, "cfg");
        need(command, "command");
        cgidm::RunOptions ro;
        if (opts != nullptr) {
            cgidm::require(opts->jobs >= 1, cgidm::ErrorCode::invalid_argument, "jobs must be >= 1");
            ro.jobs = opts->jobs;
            ro.force = opts->force != 0;
            if (opts->log != nullptr) {
                cgidm_log_fn fn = opts->log;
                void* user = opts->log_user;
                ro.log = [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
            }
        }
        cgidm::run_command(command, cfg->cfg, ro);
    });
}

cgidm_status cgidm_model_load(const char* path, cgidm_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        auto* m = new cgidm_model{};
        try {
            m->model = cgidm::load_checkpoint(path, &m->hash);
        } catch (...) {
            delete m;
            throw;
        }
        *out = m;
    });
}

cgidm_status cgidm_model_save(const cgidm_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        cgidm::save_checkpoint(path, model->model, model->hash);
    });
}

cgidm_status cgidm_model_param_count(const cgidm_model* model, size_t* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = model->model.parameter_count();
    });
}

cgidm_status cgidm_model_equal(const cgidm_model* a, const cgidm_model* b, int* out) {
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        need(out, "out");
        *out = a->model == b->model ? 1 : 0;
    });
}

void cgidm_model_free(cgidm_model* model) { delete model; }

cgidm_status cgidm_image_read_pgm(const char* path, cgidm_image** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new cgidm_image{cgidm::read_pgm(path)};
    });
}

cgidm_status cgidm_image_write_pgm(const cgidm_image* image, const char* path) {
    return guarded([&] {
        need(image, "image");
        need(path, "path");
        cgidm::write_pgm(path, image->grid);
    });
}

cgidm_status cgidm_image_size(const cgidm_image* image, size_t* rows, size_t* cols) {
    return guarded([&] {
        need(image, "image");
        need(rows, "rows");
        need(cols, "cols");
        *rows = image->grid.rows();
        *cols = image->grid.cols();
    });
}

cgidm_status cgidm_image_similarity(const cgidm_image* a, const cgidm_image* b, cgidm_metric metric, double* out) {
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        need(out, "out");
        cgidm::require(metric == CGIDM_METRIC_COSINE || metric == CGIDM_METRIC_SSIM,
                       cgidm::ErrorCode::invalid_argument, "unknown metric");
        const auto m = metric == CGIDM_METRIC_COSINE ? cgidm::SimilarityMetric::cosine : cgidm::SimilarityMetric::ssim;
        *out = cgidm::similarity(m, a->grid, b->grid);
    });
}

void cgidm_image_free(cgidm_image* image) { delete image; }

}  // extern "C"
