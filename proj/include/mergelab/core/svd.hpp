// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mergelab/core/tensor.hpp"

namespace mergelab {

/// Thin SVD, A = U * diag(s) * V^T with r = min(m, n).
///
/// u is m x r and v is n x r, both with orthonormal columns; s is descending
/// and non-negative. Each column of u has its largest-magnitude entry
/// non-negative (v columns are flipped along with it).
struct SvdResult {
    Tensor u;
    Tensor s;
    Tensor v;

    std::size_t rank_bound() const { return s.size(); }
    /// U * diag(s) * V^T.
    Tensor reconstruct() const;
};

struct SvdOptions {
    /// Columns count as orthogonal once |cos(angle)| drops below this.
    double tolerance = 1e-14;
    int max_sweeps = 60;
};

/// One-sided (Hestenes) Jacobi SVD. Throws NumericError carrying the largest
/// remaining column cosine if `max_sweeps` is exhausted.
SvdResult svd(const Tensor& a, const SvdOptions& options = {});

/// Number of singular values above `rel_tol * s[0]`.
std::size_t numerical_rank(const Tensor& s, double rel_tol = 1e-12);

} // namespace mergelab
