// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cgidm/config.hpp"
#include "cgidm/defense.hpp"
#include "cgidm/error.hpp"
#include "cgidm/experiment.hpp"
#include "cgidm/harness.hpp"
#include "cgidm/io.hpp"
#include "doctest.h"

using namespace cgidm;
namespace fs = std::filesystem;

namespace {

std::string error_text(const std::function<void()>& fn, ErrorCode* code = nullptr) {
    try {
        fn();
    } catch (const Error& e) {
        if (code) *code = e.code();
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

ExperimentConfig smoke(const fs::path& out) {
    ExperimentConfig cfg = load_experiment(fs::path(CGIDM_TEST_DATA) / "smoke.cfg");
    cfg.out_dir = out;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::path(CGIDM_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<fs::path> tree(const fs::path& root) {
    std::set<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.insert(fs::relative(e.path(), root));
    }
    return out;
}

}  // namespace

TEST_CASE("config file syntax") {
    const ConfigFile f = ConfigFile::parse("seed = 3 # trailing\n\n[data]\n; comment\nstyles = 4\n", "x.cfg");
    CHECK(f.get("seed") == "3");
    CHECK(f.get("data.styles") == "4");
    CHECK(f.line_of("data.styles") == 5);
    CHECK(!f.has("styles"));

    ErrorCode code{};
    CHECK(contains(error_text([] { ConfigFile::parse("[data]\nstyles 4\n", "x.cfg"); }, &code), "x.cfg:2:"));
    CHECK(code == ErrorCode::config);
    CHECK(contains(error_text([] { ConfigFile::parse("a = 1\n[s\n", "x.cfg"); }), "x.cfg:2: malformed section"));
    CHECK(contains(error_text([] { ConfigFile::parse("[s]\na = 1\na = 2\n", "x.cfg"); }), "x.cfg:3: duplicate key 's.a'"));
    CHECK(contains(error_text([] { ConfigFile::parse(" = 1\n", "x.cfg"); }), "x.cfg:1: empty key"));
}

TEST_CASE("experiment keys: unknown keys and bad values cite their line") {
    ErrorCode code{};
    const std::string unknown = error_text(
        [] { parse_experiment(ConfigFile::parse("[data]\nstyles = 3\nstyle = 4\n", "e.cfg")); }, &code);
    CHECK(code == ErrorCode::config);
    CHECK(contains(unknown, "e.cfg:3:"));
    CHECK(contains(unknown, "unknown key 'data.style'"));

    const std::string bad = error_text([] { parse_experiment(ConfigFile::parse("[inversion]\n\nmethod = gradient\n", "e.cfg")); });
    CHECK(contains(bad, "e.cfg:3:"));
    CHECK(contains(bad, "inversion.method"));
    CHECK(contains(error_text([] { parse_experiment(ConfigFile::parse("[pretrain]\nsteps = many\n", "e.cfg")); }), "e.cfg:2:"));

    const ExperimentConfig c = parse_experiment(ConfigFile::parse(
        "[experiment]\nseed = 9\n[inversion]\nbudget = 2.5\n[mask]\nfill = 0.25\n[finetune]\ndefenses = hflip, cutout\n"));
    CHECK(c.seed == 9);
    CHECK(c.budget.value() == 2.5);
    CHECK(!c.mask_fill_auto);
    CHECK(c.mask.fill == 0.25);
    CHECK(c.finetune.augmentations == std::vector<DefenseKind>{DefenseKind::hflip, DefenseKind::cutout});
}

TEST_CASE("validation rejects inconsistent settings") {
    ExperimentConfig c;
    CHECK_NOTHROW(validate(c));
    c.inversion = InversionMethod::latent;
    CHECK_THROWS_AS(validate(c), Error);
    c.autoencoder = true;
    CHECK_NOTHROW(validate(c));

    ExperimentConfig d;
    d.image_size = 20;
    CHECK_THROWS_AS(validate(d), Error);
    d = ExperimentConfig{};
    d.mia_t = {0};
    CHECK_THROWS_AS(validate(d), Error);
    d = ExperimentConfig{};
    d.t_lo = 50;
    d.t_hi = 10;
    CHECK_THROWS_AS(validate(d), Error);
    CHECK_THROWS_AS(parse_experiment(ConfigFile::parse("[data]\nimages_per_style = 1\n")), Error);
}

TEST_CASE("canonical text round trips and fixes the hash") {
    ExperimentConfig c;
    c.seed = 42;
    c.budget = 1.75;
    c.hidden = {64, 32};
    c.finetune.augmentations = {DefenseKind::rand_lite};
    c.mask_fill_auto = false;
    c.mask.fill = 0.3;
    const std::string text = canonical_text(c);
    const ExperimentConfig back = parse_experiment(ConfigFile::parse(text));
    CHECK(canonical_text(back) == text);
    CHECK(config_hash(back) == config_hash(c));

    const std::string h = config_hash(c);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    ExperimentConfig moved = c;
    moved.out_dir = "elsewhere";
    CHECK(config_hash(moved) == h);
    ExperimentConfig reseeded = c;
    reseeded.seed = 43;
    CHECK(config_hash(reseeded) != h);

    // published FNV-1a 64 test vectors
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("stage hashes depend only on upstream sections") {
    const ExperimentConfig base;
    auto differs = [&](const std::function<void(ExperimentConfig&)>& edit, Stage stage) {
        ExperimentConfig c = base;
        edit(c);
        return stage_hash(c, stage) != stage_hash(base, stage);
    };
    const auto more_steps = [](ExperimentConfig& c) { c.inversion_steps = 50; };
    CHECK(!differs(more_steps, Stage::data));
    CHECK(!differs(more_steps, Stage::finetune));
    CHECK(differs(more_steps, Stage::invert));
    CHECK(differs(more_steps, Stage::evaluate));

    const auto lr = [](ExperimentConfig& c) { c.pretrain_lr = 5e-4; };
    CHECK(!differs(lr, Stage::data));
    CHECK(differs(lr, Stage::pretrain));
    CHECK(differs(lr, Stage::finetune));
    CHECK(differs(lr, Stage::mia));

    const auto pipeline = [](ExperimentConfig& c) { c.baseline = BaselinePipeline::text2img; };
    CHECK(!differs(pipeline, Stage::invert));
    CHECK(differs(pipeline, Stage::baseline));

    const auto seed = [](ExperimentConfig& c) { c.seed = 2; };
    for (Stage s : {Stage::data, Stage::pretrain, Stage::finetune, Stage::invert, Stage::baseline, Stage::evaluate,
                    Stage::mia, Stage::sweep}) {
        CHECK(differs(seed, s));
    }
}

TEST_CASE("derived seeds are distinct across streams and indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t stream = 1; stream <= 11; ++stream) {
        for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(7, stream, i));
    }
    CHECK(seen.size() == 550);
    CHECK(derive_seed(7, 3, 2) == derive_seed(7, 3, 2));
    CHECK(derive_seed(7, 3, 2) != derive_seed(8, 3, 2));
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 2,
                                 [](std::size_t i) {
                                     if (i == 6) fail(ErrorCode::numerical, "boom");
                                 }),
                    Error);
}

TEST_CASE("defenses copy their input and keep the range") {
    Rng rng(3);
    Grid img = Grid::image(16, 16);
    for (auto& v : img.values()) v = rng.uniform();
    const Grid before = img;
    int flips = 0;
    for (int k = 0; k < 400; ++k) {
        const Grid out = apply_defense(img, DefenseKind::hflip, rng);
        if (out != img) ++flips;
    }
    CHECK(img == before);
    CHECK(flips > 150);
    CHECK(flips < 250);

    for (int k = 0; k < 20; ++k) {
        const Grid out = apply_defense(img, DefenseKind::cutout, rng);
        int zeros = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out.values()[i] != img.values()[i]) {
                CHECK(out.values()[i] == 0.0);
                ++zeros;
            }
        }
        CHECK(zeros == 4);  // side 16 / 8 = 2
        const Grid lite = apply_defense(img, DefenseKind::rand_lite, rng);
        for (double v : lite.values()) CHECK((v >= 0.0 && v <= 1.0));
    }
    for (DefenseKind d : {DefenseKind::hflip, DefenseKind::cutout, DefenseKind::rand_lite}) {
        CHECK(parse_defense(defense_name(d)) == d);
    }
    CHECK_THROWS_AS(parse_defense("mixup"), Error);
}

TEST_CASE("csv writers stamp the hash") {
    ScoreTable t;
    t.rows = {{0, 1, true, 0.5}, {1, 0, false, 0.25}};
    const std::string text = format_csv(score_csv(t, "00ff"));
    CHECK(text.rfind("# config_hash=00ff\nclass,image,is_member,score\n", 0) == 0);
    const CsvTable back = parse_csv(text);
    CHECK(back.config_hash == "00ff");
    CHECK(back.rows.size() == 2);
    CHECK(back.rows[1][2] == "0");

    const CsvTable s = summary_table({{"cgi", Summary{"cosine", 0.75, 1.0, 0.8}}}, "ab");
    CHECK(s.header == std::vector<std::string>{"source", "metric", "acc_universal", "acc_per_class", "auc"});
    CHECK(s.rows.at(0).at(0) == "cgi");
    CHECK(std::stod(s.rows.at(0).at(4)) == 0.8);
}

TEST_CASE("missing artifacts are named") {
    const ExperimentConfig cfg = smoke(fresh_dir("missing"));
    ErrorCode code{};
    const std::string msg = error_text([&] { cmd_pretrain(cfg, {}); }, &code);
    CHECK(code == ErrorCode::missing_artifact);
    CHECK(contains(msg, "not found:"));
    CHECK(contains(msg, "split.csv"));
    CHECK_THROWS_AS(run_command("extract", cfg, {}), Error);
}

TEST_CASE("pipeline on the smoke config is byte-for-byte reproducible") {
    const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b");
    cmd_pipeline(smoke(a), {});
    RunOptions two;
    two.jobs = 2;
    cmd_pipeline(smoke(b), two);

    const auto files = tree(a);
    REQUIRE(files == tree(b));
    int pgm = 0, csv = 0;
    for (const fs::path& f : files) {
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f.string());
        pgm += f.extension() == ".pgm" ? 1 : 0;
        csv += f.extension() == ".csv" ? 1 : 0;
    }
    CHECK(pgm > 0);
    CHECK(csv > 0);

    const ExperimentConfig cfg = smoke(a);
    const Layout L{a};
    CHECK(fs::exists(L.partial_image(1, 3)));
    CHECK(fs::exists(L.mask_image(1, 3)));
    CHECK(fs::exists(L.recovered_image(InversionMethod::cgi, 0, 0)));
    CHECK(fs::exists(L.baseline_image(BaselinePipeline::img2img, 1, 3, 1)));

    const CsvTable summary = read_csv(L.reports() / "summary.csv");
    CHECK(summary.config_hash == stage_hash(cfg, Stage::evaluate));
    CHECK(summary.rows.size() == 4);  // {cgi, img2img} x {cosine, ssim}
    const CsvTable mia = read_csv(L.reports() / "mia.csv");
    CHECK(mia.rows.size() == 4);  // {cmia, naive} x {10, 50}
    for (const auto& row : mia.rows) {
        const double v = std::stod(row.at(2));
        CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("stages refuse artifacts from another config unless forced") {
    const fs::path dir = fresh_dir("mismatch");
    ExperimentConfig cfg = smoke(dir);
    cmd_gen_data(cfg, {});
    cmd_pretrain(cfg, {});

    ExperimentConfig other = cfg;
    other.pretrain_steps = 41;
    ErrorCode code{};
    const std::string msg = error_text([&] { cmd_finetune(other, {}); }, &code);
    CHECK(code == ErrorCode::hash_mismatch);
    CHECK(contains(msg, "pretrained.ckpt"));
    CHECK(contains(msg, "--force"));

    std::vector<std::string> log;
    RunOptions forced;
    forced.force = true;
    forced.log = [&](const std::string& m) { log.push_back(m); };
    CHECK_NOTHROW(cmd_finetune(other, forced));
    bool warned = false;
    for (const auto& m : log) warned = warned || contains(m, "warning:");
    CHECK(warned);

    ExperimentConfig reseeded = cfg;
    reseeded.seed = 8;
    CHECK_THROWS_AS(cmd_pretrain(reseeded, {}), Error);
}

TEST_CASE("command names dispatch") {
    const auto& names = command_names();
    for (const char* n : {"gen-data", "pretrain", "finetune", "invert", "baseline", "evaluate", "mia", "sweep", "pipeline"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
}
