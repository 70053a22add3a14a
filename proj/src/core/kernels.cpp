// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/core/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "mergelab/core/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mergelab {

namespace {

void require_2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
    }
}

void require_inner(std::size_t lhs, std::size_t rhs, const Tensor& a, const Tensor& b, const char* op) {
    if (lhs != rhs) {
        throw DimensionError(std::string(op) + ": inner dimensions disagree, " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    }
}

// Row kernels shared by both flavours; `i` selects the output row.

inline void matmul_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                       std::size_t n) {
    for (std::size_t t = 0; t < k; ++t) {
        const double av = a[i * k + t];
        const double* brow = b + t * n;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

inline void matmul_tn_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                          std::size_t m, std::size_t n) {
    double* crow = c + i * n;
    for (std::size_t t = 0; t < k; ++t) {
        const double av = a[t * m + i];
        const double* brow = b + t * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                          std::size_t n) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
        c[i * n + j] = acc;
    }
}

inline void softmax_row(const double* x, double* y, std::size_t c) {
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        y[j] = std::exp(x[j] - mx);
        z += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
}

inline void log_softmax_row(const double* x, double* y, std::size_t c) {
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) y[j] = x[j] - lse;
}

struct RowView {
    std::size_t rows;
    std::size_t cols;
};

RowView last_axis_rows(const Tensor& t, const char* op) {
    if (t.rank() == 0) throw DimensionError(std::string(op) + ": empty tensor");
    const std::size_t c = t.shape().back();
    return {t.size() / c, c};
}

} // namespace

namespace kernels {

bool openmp_enabled() noexcept {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

void set_max_threads(int threads) {
    if (threads < 0) throw ConfigError("thread count must be >= 0");
#ifdef _OPENMP
    static const int default_threads = omp_get_max_threads();
    omp_set_num_threads(threads == 0 ? default_threads : threads);
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::exception_ptr first;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(mergelab_parallel_for)
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

namespace serial {

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    require_inner(a.dim(1), b.dim(0), a, b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) matmul_row(a.data().data(), b.data().data(), c.values().data(), i, k, n);
    debug_check_finite(c, "matmul");
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    require_inner(a.dim(0), b.dim(0), a, b, "matmul_tn");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        matmul_tn_row(a.data().data(), b.data().data(), c.values().data(), i, k, m, n);
    debug_check_finite(c, "matmul_tn");
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    require_inner(a.dim(1), b.dim(1), a, b, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) matmul_nt_row(a.data().data(), b.data().data(), c.values().data(), i, k, n);
    debug_check_finite(c, "matmul_nt");
    return c;
}

Tensor softmax_rows(const Tensor& logits) {
    const auto [rows, cols] = last_axis_rows(logits, "softmax");
    Tensor y = Tensor::zeros(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) softmax_row(logits.data().data() + r * cols, y.values().data() + r * cols, cols);
    debug_check_finite(y, "softmax");
    return y;
}

Tensor log_softmax_rows(const Tensor& logits) {
    const auto [rows, cols] = last_axis_rows(logits, "log_softmax");
    Tensor y = Tensor::zeros(logits.shape());
    for (std::size_t r = 0; r < rows; ++r)
        log_softmax_row(logits.data().data() + r * cols, y.values().data() + r * cols, cols);
    debug_check_finite(y, "log_softmax");
    return y;
}

} // namespace serial

namespace parallel {

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    require_inner(a.dim(1), b.dim(0), a, b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.values().data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_row(ap, bp, cp, static_cast<std::size_t>(i), k, n);
    debug_check_finite(c, "matmul");
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    require_inner(a.dim(0), b.dim(0), a, b, "matmul_tn");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.values().data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_tn_row(ap, bp, cp, static_cast<std::size_t>(i), k, m, n);
    debug_check_finite(c, "matmul_tn");
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    require_inner(a.dim(1), b.dim(1), a, b, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c = Tensor::zeros({m, n});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.values().data();
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_nt_row(ap, bp, cp, static_cast<std::size_t>(i), k, n);
    debug_check_finite(c, "matmul_nt");
    return c;
}

Tensor softmax_rows(const Tensor& logits) {
    const auto [rows, cols] = last_axis_rows(logits, "softmax");
    Tensor y = Tensor::zeros(logits.shape());
    const double* xp = logits.data().data();
    double* yp = y.values().data();
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) softmax_row(xp + r * cols, yp + r * cols, cols);
    debug_check_finite(y, "softmax");
    return y;
}

Tensor log_softmax_rows(const Tensor& logits) {
    const auto [rows, cols] = last_axis_rows(logits, "log_softmax");
    Tensor y = Tensor::zeros(logits.shape());
    const double* xp = logits.data().data();
    double* yp = y.values().data();
    const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) log_softmax_row(xp + r * cols, yp + r * cols, cols);
    debug_check_finite(y, "log_softmax");
    return y;
}

} // namespace parallel

} // namespace kernels

namespace {

bool go_parallel(std::size_t flops) {
#ifdef _OPENMP
    return flops >= kernels::kParallelFlopThreshold;
#else
    (void)flops;
    return false;
#endif
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t flops = a.size() * (b.rank() == 2 ? b.dim(1) : 1);
    return go_parallel(flops) ? kernels::parallel::matmul(a, b) : kernels::serial::matmul(a, b);
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    const std::size_t flops = a.size() * (b.rank() == 2 ? b.dim(1) : 1);
    return go_parallel(flops) ? kernels::parallel::matmul_tn(a, b) : kernels::serial::matmul_tn(a, b);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const std::size_t flops = a.size() * (b.rank() == 2 ? b.dim(0) : 1);
    return go_parallel(flops) ? kernels::parallel::matmul_nt(a, b) : kernels::serial::matmul_nt(a, b);
}

Tensor softmax(const Tensor& logits) {
    return go_parallel(logits.size() * 8) ? kernels::parallel::softmax_rows(logits)
                                          : kernels::serial::softmax_rows(logits);
}

Tensor log_softmax(const Tensor& logits) {
    return go_parallel(logits.size() * 8) ? kernels::parallel::log_softmax_rows(logits)
                                          : kernels::serial::log_softmax_rows(logits);
}

Tensor tanh(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.values()) v = std::tanh(v);
    return y;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_2d(x, "add_row_bias");
    if (bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
        throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) + " does not fit " +
                             shape_str(x.shape()));
    }
    Tensor y = x;
    const std::size_t n = x.dim(1);
    for (std::size_t r = 0; r < x.dim(0); ++r)
        for (std::size_t j = 0; j < n; ++j) y.at(r, j) += bias[j];
    debug_check_finite(y, "add_row_bias");
    return y;
}

Tensor column_sums(const Tensor& x) {
    require_2d(x, "column_sums");
    Tensor s = Tensor::zeros({x.dim(1)});
    for (std::size_t r = 0; r < x.dim(0); ++r)
        for (std::size_t j = 0; j < x.dim(1); ++j) s[j] += x.at(r, j);
    return s;
}

} // namespace mergelab
