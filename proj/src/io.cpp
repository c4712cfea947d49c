// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cgidm/error.hpp"

namespace cgidm {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        require(!ec, ErrorCode::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorCode::io, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(static_cast<bool>(out), ErrorCode::io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    require(!ec, ErrorCode::io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::missing_artifact, "missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string encode_pgm(const Grid& image) {
    const std::size_t rows = image.rows();
    const std::size_t cols = image.cols();
    std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    out.reserve(out.size() + image.size());
    for (double v : image.values()) {
        const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
    return out;
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
}

std::size_t parse_size(const std::string& token, const char* what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        fail(ErrorCode::format, std::string("bad PGM ") + what + ": '" + token + "'");
    }
    return v;
}

}  // namespace

Grid decode_pgm(const std::string& bytes) {
    std::size_t pos = 0;
    if (pgm_token(bytes, pos) != "P5") fail(ErrorCode::format, "not a binary PGM (P5)");
    const std::size_t cols = parse_size(pgm_token(bytes, pos), "width");
    const std::size_t rows = parse_size(pgm_token(bytes, pos), "height");
    const std::size_t maxval = parse_size(pgm_token(bytes, pos), "maxval");
    require(maxval > 0 && maxval < 256, ErrorCode::format, "PGM maxval must be in 1..255");
    require(rows > 0 && cols > 0, ErrorCode::format, "PGM has zero size");
    ++pos;  // single whitespace after maxval
    require(bytes.size() >= pos + rows * cols, ErrorCode::format, "PGM pixel data truncated");
    Grid g = Grid::image(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        g[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / static_cast<double>(maxval);
    }
    return g;
}

void write_pgm(const fs::path& path, const Grid& image) { write_file_atomic(path, encode_pgm(image)); }

Grid read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::format, "CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        require(cells[i].find_first_of(",\n\"") == std::string::npos, ErrorCode::format,
                "CSV cell contains a delimiter: " + cells[i]);
        line += cells[i];
    }
    return line;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

std::string format_csv(const CsvTable& table) {
    std::string out;
    if (!table.config_hash.empty()) out += "# config_hash=" + table.config_hash + "\n";
    out += join(table.header) + "\n";
    for (const auto& row : table.rows) {
        require(row.size() == table.header.size(), ErrorCode::format, "CSV row width differs from header");
        out += join(row) + "\n";
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream ss(text);
    std::string line;
    bool have_header = false;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# config_hash=", 0) == 0) {
            table.config_hash = line.substr(14);
            continue;
        }
        if (line[0] == '#') continue;
        if (!have_header) {
            table.header = split(line);
            have_header = true;
        } else {
            auto row = split(line);
            require(row.size() == table.header.size(), ErrorCode::format, "CSV row width differs from header: " + line);
            table.rows.push_back(std::move(row));
        }
    }
    require(have_header, ErrorCode::format, "CSV has no header row");
    return table;
}

void write_csv(const fs::path& path, const CsvTable& table) { write_file_atomic(path, format_csv(table)); }

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace cgidm
