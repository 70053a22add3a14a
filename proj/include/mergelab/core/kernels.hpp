// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "mergelab/core/tensor.hpp"

namespace mergelab {

// Dense kernels come in two flavours with identical signatures:
//   kernels::serial   - straightforward loops, the reference used by tests
//   kernels::parallel - OpenMP over output rows
// Each output element is accumulated in the same order in both, so results
// are bit-identical; the dispatching free functions below pick one by size.
namespace kernels {

namespace serial {
/// c = a * b                (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
/// c = a^T * b              (k x m)^T * (k x n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// c = a * b^T              (m x k) * (n x k)^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);
} // namespace serial

namespace parallel {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);
} // namespace parallel

/// Multiply-add count above which the dispatchers use the parallel variant.
inline constexpr std::size_t kParallelFlopThreshold = 1u << 16;

/// True when built with OpenMP.
bool openmp_enabled() noexcept;

/// Caps the number of worker threads (0 restores the OpenMP default).
void set_max_threads(int threads);
int max_threads() noexcept;

/// Runs body(i) for i in [0, n) across OpenMP threads. The first exception
/// thrown by any iteration is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace kernels

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& logits);
/// Log-softmax over the last axis via log-sum-exp.
Tensor log_softmax(const Tensor& logits);

Tensor tanh(const Tensor& x);
/// x (B x n) + bias (n) broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// Column sums of a 2-D tensor, shape (n).
Tensor column_sums(const Tensor& x);

} // namespace mergelab
