// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/core/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab {

namespace {

// Column-major scratch matrix; Jacobi rotations touch whole columns.
struct Columns {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double* col(std::size_t j) { return data.data() + j * rows; }
    const double* col(std::size_t j) const { return data.data() + j * rows; }
};

double col_dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double col_norm(const double* x, std::size_t n) {
    double scale = 0.0, ssq = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0) continue;
        const double a = std::abs(x[i]);
        if (scale < a) {
            ssq = 1.0 + ssq * (scale / a) * (scale / a);
            scale = a;
        } else {
            ssq += (a / scale) * (a / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

// Orthonormal basis vector for `target`, orthogonal to `basis` columns.
void complete_column(const std::vector<const double*>& basis, double* target, std::size_t m) {
    for (std::size_t k = 0; k < m; ++k) {
        std::fill(target, target + m, 0.0);
        target[k] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (const double* b : basis) {
                const double p = col_dot(b, target, m);
                for (std::size_t i = 0; i < m; ++i) target[i] -= p * b[i];
            }
        }
        const double nrm = col_norm(target, m);
        if (nrm > 0.5) {
            for (std::size_t i = 0; i < m; ++i) target[i] /= nrm;
            return;
        }
    }
    throw NumericError("svd: could not complete an orthonormal basis");
}

// Requires m >= n. Returns U (m x n), s (n), V (n x n) without sign fixing.
SvdResult jacobi_tall(const Tensor& a, const SvdOptions& opt) {
    const std::size_t m = a.dim(0), n = a.dim(1);
    Columns w{m, n, std::vector<double>(m * n)};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) w.data[j * m + i] = a.at(i, j);
    Columns v{n, n, std::vector<double>(n * n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

    const double tol = std::max(opt.tolerance, std::sqrt(static_cast<double>(m)) *
                                                   std::numeric_limits<double>::epsilon());
    // Columns below this norm are rounding residue (for example what remains
    // of an exactly duplicated column) and are treated as zero.
    const double negligible = col_norm(w.data.data(), m * n) * 1e-14;
    bool converged = (n < 2);
    double worst = 0.0;
    for (int sweep = 0; sweep < opt.max_sweeps && !converged; ++sweep) {
        worst = 0.0;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* wp = w.col(p);
                double* wq = w.col(q);
                const double np = col_norm(wp, m);
                const double nq = col_norm(wq, m);
                if (np <= negligible || nq <= negligible) continue;
                const double gamma = col_dot(wp, wq, m);
                const double cosine = std::abs(gamma) / np / nq;
                worst = std::max(worst, cosine);
                if (cosine <= tol) continue;
                rotated = true;
                const double alpha = np * np;
                const double beta = nq * nq;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(wp, wq, m, c, s);
                rotate(v.col(p), v.col(q), n, c, s);
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw NumericError("svd: one-sided Jacobi did not converge; largest column cosine " + std::to_string(worst),
                           worst);
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = col_norm(w.col(j), m);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double smax = sigma[order[0]];
    SvdResult out{Tensor::zeros({m, n}), Tensor::zeros({n}), Tensor::zeros({n, n})};
    Columns u{m, n, std::vector<double>(m * n, 0.0)};
    std::vector<bool> needs_completion(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.s[k] = sigma[j];
        if (sigma[j] == 0.0 || sigma[j] <= negligible || sigma[j] < smax * 1e-15) {
            needs_completion[k] = true;
        } else {
            const double* src = w.col(j);
            for (std::size_t i = 0; i < m; ++i) u.col(k)[i] = src[i] / sigma[j];
        }
        for (std::size_t i = 0; i < n; ++i) out.v.at(i, k) = v.col(j)[i];
    }
    std::vector<const double*> basis;
    for (std::size_t k = 0; k < n; ++k)
        if (!needs_completion[k]) basis.push_back(u.col(k));
    for (std::size_t k = 0; k < n; ++k) {
        if (!needs_completion[k]) continue;
        complete_column(basis, u.col(k), m);
        basis.push_back(u.col(k));
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < m; ++i) out.u.at(i, k) = u.col(k)[i];
    return out;
}

void fix_signs(SvdResult& r) {
    const std::size_t m = r.u.dim(0), k = r.u.dim(1), n = r.v.dim(0);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = std::abs(r.u.at(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (r.u.at(arg, j) < 0.0) {
            for (std::size_t i = 0; i < m; ++i) r.u.at(i, j) = -r.u.at(i, j);
            for (std::size_t i = 0; i < n; ++i) r.v.at(i, j) = -r.v.at(i, j);
        }
    }
}

} // namespace

Tensor SvdResult::reconstruct() const {
    Tensor us = u;
    for (std::size_t i = 0; i < us.dim(0); ++i)
        for (std::size_t j = 0; j < us.dim(1); ++j) us.at(i, j) *= s[j];
    return matmul_nt(us, v);
}

SvdResult svd(const Tensor& a, const SvdOptions& options) {
    if (a.rank() != 2) throw DimensionError("svd: expected a 2-D tensor, got " + shape_str(a.shape()));
    a.check_finite("svd input");
    SvdResult r;
    if (a.dim(0) >= a.dim(1)) {
        r = jacobi_tall(a, options);
    } else {
        SvdResult t = jacobi_tall(a.transposed(), options);
        r = SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
    }
    fix_signs(r);
    return r;
}

std::size_t numerical_rank(const Tensor& s, double rel_tol) {
    if (s.empty() || s[0] == 0.0) return 0;
    std::size_t r = 0;
    for (double v : s.values())
        if (v > rel_tol * s[0]) ++r;
    return r;
}

} // namespace mergelab
