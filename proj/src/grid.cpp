// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgidm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgidm/error.hpp"

namespace cgidm {

std::size_t shape_size(const Shape& shape) {
    require(!shape.empty(), ErrorCode::invalid_argument, "shape must have at least one dimension");
    std::size_t n = 1;
    for (auto d : shape) {
        require(d >= 1, ErrorCode::invalid_argument, "zero-sized dimension in shape " + shape_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Grid::Grid(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Grid::Grid(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_size(shape_), ErrorCode::shape_mismatch,
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
}

std::size_t Grid::rows() const {
    require(shape_.size() == 2, ErrorCode::shape_mismatch, "expected a 2-D grid, got " + shape_string(shape_));
    return shape_[0];
}

std::size_t Grid::cols() const {
    require(shape_.size() == 2, ErrorCode::shape_mismatch, "expected a 2-D grid, got " + shape_string(shape_));
    return shape_[1];
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (a.shape() != b.shape()) {
        fail(ErrorCode::shape_mismatch,
             std::string(what) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            fail(ErrorCode::numerical, std::string(what) + ": non-finite value");
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::shape_mismatch, "dot: length mismatch");
    // four accumulators keep the reduction pipelined without reassociating per element
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    const std::size_t n = a.size();
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

double l2_norm(std::span<const double> values) {
    return std::sqrt(dot(values, values));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::shape_mismatch, "squared_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double l2_distance(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "l2_distance");
    return std::sqrt(squared_distance(a.values(), b.values()));
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), ErrorCode::shape_mismatch, "axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Grid operator+(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "grid addition");
    Grid out = a;
    axpy(1.0, b.values(), out.values());
    return out;
}

Grid operator-(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "grid subtraction");
    Grid out = a;
    axpy(-1.0, b.values(), out.values());
    return out;
}

Grid operator*(double s, const Grid& g) {
    Grid out = g;
    for (auto& v : out.values()) v *= s;
    return out;
}

Grid clamp01(Grid g) {
    for (auto& v : g.values()) v = std::clamp(v, 0.0, 1.0);
    return g;
}

double mean(const Grid& g) {
    double s = 0.0;
    for (double v : g.values()) s += v;
    return g.empty() ? 0.0 : s / static_cast<double>(g.size());
}

double variance(const Grid& g) {
    if (g.empty()) return 0.0;
    const double m = mean(g);
    double s = 0.0;
    for (double v : g.values()) s += (v - m) * (v - m);
    return s / static_cast<double>(g.size());
}

}  // namespace cgidm
