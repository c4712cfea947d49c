// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "cgidm/error.hpp"
#include "cgidm/grid.hpp"
#include "cgidm/io.hpp"
#include "cgidm/rng.hpp"
#include "doctest.h"

using namespace cgidm;

TEST_CASE("grid shape invariants") {
    Grid g({2, 3}, 1.5);
    CHECK(g.size() == 6);
    CHECK(g.rows() == 2);
    CHECK(g.cols() == 3);
    CHECK_THROWS_AS(Grid(Shape{2, 2}, std::vector<double>{1.0, 2.0}), Error);
    CHECK_THROWS_AS(g + Grid({3, 2}), Error);
}

TEST_CASE("l2_norm examples") {
    CHECK(l2_norm(Grid({2}, std::vector<double>{3.0, 4.0})) == 5.0);
    CHECK(l2_norm(Grid({4}, 0.0)) == 0.0);
    CHECK(l2_norm(Grid({4}, 1.0)) == 2.0);
}

TEST_CASE("l2_norm is absolutely homogeneous") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Grid g = gaussian_sample(rng, {5, 7});
        const double c = rng.uniform(-10.0, 10.0);
        const double lhs = l2_norm(c * g), rhs = std::abs(c) * l2_norm(g);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * rhs);
    }
}

TEST_CASE("box-muller hand value") {
    // sqrt(-2 ln 0.5) * cos(pi / 2) = 0; the sine branch equals the radius.
    const auto [z1, z2] = box_muller(0.5, 0.25);
    CHECK(std::abs(z1) < 1e-15);
    CHECK(z2 == doctest::Approx(std::sqrt(2.0 * std::numbers::ln2)).epsilon(1e-15));
}

TEST_CASE("rng determinism and seed split") {
    Rng a(42), b(42);
    const Grid g1 = gaussian_sample(a, {2});
    const Grid g2 = gaussian_sample(a, {2});
    CHECK(g1 != g2);
    CHECK(gaussian_sample(b, {2}) == g1);
    CHECK(gaussian_sample(b, {2}) == g2);
    CHECK(Rng(42).split(5).seed() == (42u ^ 5u));
}

TEST_CASE("gaussian moments over 1e5 draws") {
    Rng rng(11);
    const Grid g = gaussian_sample(rng, {100000});
    CHECK(std::abs(mean(g)) < 0.02);
    CHECK(std::abs(variance(g) - 1.0) < 0.03);
}

TEST_CASE("gaussian_sample rejects zero-sized shapes") {
    Rng rng(1);
    CHECK_THROWS_AS(gaussian_sample(rng, {0, 3}), Error);
}

TEST_CASE("uniform_timestep") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) CHECK(uniform_timestep(rng, 7, 7) == 7);
    CHECK_THROWS_AS(uniform_timestep(rng, 5, 4), Error);
    CHECK_THROWS_AS(uniform_timestep(rng, 0, 4), Error);

    // every bucket of U{1..100} within 3 sigma of its expectation
    std::vector<int> counts(101, 0);
    for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(uniform_timestep(rng, 1, 100))];
    const double sigma = std::sqrt(100000 * 0.01 * 0.99);
    for (int t = 1; t <= 100; ++t) CHECK(std::abs(counts[static_cast<std::size_t>(t)] - 1000.0) < 3.0 * sigma);
}

TEST_CASE("pgm round trip on the 8-bit grid") {
    Grid g = Grid::image(3, 5);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i * 17 % 256) / 255.0;
    const std::string bytes = encode_pgm(g);
    CHECK(bytes.rfind("P5\n5 3\n255\n", 0) == 0);
    CHECK(decode_pgm(bytes) == g);
    CHECK(encode_pgm(decode_pgm(bytes)) == bytes);
    CHECK_THROWS_AS(decode_pgm("P6\n1 1\n255\n\0"), Error);
}

TEST_CASE("csv round trip keeps hash and rows") {
    CsvTable t;
    t.config_hash = "00ff";
    t.header = {"a", "b"};
    t.rows = {{"1", "x"}, {"2", "y"}};
    const std::string text = format_csv(t);
    CHECK(text == "# config_hash=00ff\na,b\n1,x\n2,y\n");
    const CsvTable back = parse_csv(text);
    CHECK(back.config_hash == "00ff");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
}

TEST_CASE("atomic write leaves no temp file") {
    const auto dir = std::filesystem::temp_directory_path() / "cgidm_tensor_core_test";
    std::filesystem::remove_all(dir);
    write_file_atomic(dir / "sub" / "f.txt", "hello");
    CHECK(read_file(dir / "sub" / "f.txt") == "hello");
    CHECK_FALSE(std::filesystem::exists(dir / "sub" / "f.txt.tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("format_double round trips") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.gaussian() * std::pow(10.0, rng.uniform(-20.0, 20.0));
        CHECK(std::stod(format_double(v)) == v);
    }
}
