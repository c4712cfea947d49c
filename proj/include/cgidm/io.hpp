// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cgidm/grid.hpp"

namespace cgidm {

/// Write to a sibling temp file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255, value = round(clamp(v, 0, 1) * 255).
std::string encode_pgm(const Grid& image);
Grid decode_pgm(const std::string& bytes);
void write_pgm(const std::filesystem::path& path, const Grid& image);
Grid read_pgm(const std::filesystem::path& path);

/// Minimal CSV document: optional "# config_hash=..." line, header, rows.
struct CsvTable {
    std::string config_hash;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

std::string format_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

}  // namespace cgidm
