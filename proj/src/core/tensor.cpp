// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "mergelab/core/error.hpp"

namespace mergelab {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace {

void validate_shape(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero dimension");
    }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

} // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
    check_finite("Tensor construction");
}

Tensor Tensor::zeros(Shape shape) {
    validate_shape(shape);
    Tensor t;
    t.data_.assign(shape_numel(shape), 0.0);
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    t.check_finite("Tensor::full");
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
    }
    return shape_[axis];
}

double Tensor::item() const {
    if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    validate_shape(shape);
    if (shape_numel(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
    if (rank() != 2) throw DimensionError("gather_rows needs a 2-D tensor");
    const std::size_t cols = shape_[1];
    Tensor out = zeros({rows.size(), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= shape_[0]) throw DimensionError("gather_rows index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    return out;
}

Tensor Tensor::transposed() const {
    if (rank() != 2) throw DimensionError("transpose needs a 2-D tensor");
    const std::size_t m = shape_[0], n = shape_[1];
    Tensor out = zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data_[j * m + i] = data_[i * n + j];
    return out;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(const char* where) const {
    if (!all_finite()) throw NumericError(std::string(where) + ": non-finite value in tensor");
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    Tensor out = a;
    axpy(1.0, b, out);
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    require_same(a, b, "subtract");
    Tensor out = a;
    axpy(-1.0, b, out);
    return out;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    for (auto& v : out.values()) v *= s;
    debug_check_finite(out, "scale");
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same(a, b, "hadamard");
    Tensor out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    debug_check_finite(out, "hadamard");
    return out;
}

void axpy(double s, const Tensor& b, Tensor& a) {
    require_same(a, b, "axpy");
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] += s * bv[i];
    debug_check_finite(a, "axpy");
}

double dot(const Tensor& a, const Tensor& b) {
    require_same(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double frobenius_norm(const Tensor& a) {
    // Scaled accumulation so tiny and huge entries do not under/overflow.
    double scale = 0.0, ssq = 1.0;
    for (double v : a.values()) {
        if (v == 0.0) continue;
        const double av = std::abs(v);
        if (scale < av) {
            ssq = 1.0 + ssq * (scale / av) * (scale / av);
            scale = av;
        } else {
            ssq += (av / scale) * (av / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double sum(const Tensor& a) { return std::accumulate(a.values().begin(), a.values().end(), 0.0); }

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

} // namespace mergelab
