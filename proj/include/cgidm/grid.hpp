// Copyright 2026 The cgidm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cgidm {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles. Images are 2-D grids (rows, cols);
/// latents of the autoencoder use the same representation.
class Grid {
public:
    Grid() = default;
    explicit Grid(Shape shape, double fill = 0.0);
    Grid(Shape shape, std::vector<double> data);

    static Grid image(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Grid(Shape{rows, cols}, fill);
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Grid&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Throws shape_mismatch naming `what` when the shapes differ.
void require_same_shape(const Grid& a, const Grid& b, const char* what);

/// Throws numerical when any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

double l2_norm(std::span<const double> values);
inline double l2_norm(const Grid& g) { return l2_norm(g.values()); }
double l2_distance(const Grid& a, const Grid& b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

Grid operator+(const Grid& a, const Grid& b);
Grid operator-(const Grid& a, const Grid& b);
Grid operator*(double s, const Grid& g);

Grid clamp01(Grid g);
double mean(const Grid& g);
/// Population variance of all entries.
double variance(const Grid& g);

}  // namespace cgidm
