// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mergelab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Construction from explicit data rejects NaN/Inf and shape/size mismatch.
/// Kernels write through `values()` on a zero-initialized tensor; debug builds
/// re-validate their outputs with `debug_check_finite`.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    /// 2-D tensor from nested rows, for tests and small literals.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    /// Row-major 2-D access.
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    /// Scalar value of a one-element tensor.
    double item() const;

    Tensor reshaped(Shape shape) const;
    /// Rows of a 2-D tensor, in the given order.
    Tensor gather_rows(std::span<const std::size_t> rows) const;
    Tensor transposed() const;

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;
    /// Throws NumericError naming `where` if any entry is NaN/Inf.
    void check_finite(const char* where) const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

#ifdef NDEBUG
inline void debug_check_finite(const Tensor&, const char*) {}
#else
inline void debug_check_finite(const Tensor& t, const char* where) { t.check_finite(where); }
#endif

// Entrywise helpers. All require identical shapes.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// a += s * b
void axpy(double s, const Tensor& b, Tensor& a);

double dot(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double mean(const Tensor& a);

} // namespace mergelab
