// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "mergelab/core/tensor.hpp"

namespace mergelab {

/// Philox4x32 with 10 rounds (Salmon et al., Random123). Pure function of
/// (counter, key); exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based generator: a 64-bit key and a 128-bit block counter.
///
/// Streams are derived, never shared: `split(purpose, a, b)` hashes the parent
/// key with the purpose string and two integers (typically task and step) to
/// a fresh key with its counter at zero. The derived stream depends only on
/// the parent key, not on how many values the parent has produced, so work
/// that splits per (task, step) is reproducible under any scheduling.
class Prng {
public:
    static constexpr std::string_view kAlgorithm = "philox4x32-10+splitmix64-keyed";

    explicit Prng(std::uint64_t seed);

    Prng split(std::string_view purpose, std::uint64_t a = 0, std::uint64_t b = 0) const;

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64();
    /// Uniform double in the open interval (0, 1) with 53 random bits.
    double uniform();
    double gaussian();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    struct KeyTag {};
    Prng(std::uint64_t key, KeyTag) : key_(key) {}

    void refill();

    std::uint64_t key_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_gaussian_ = 0.0;
    bool has_spare_ = false;
};

/// I.i.d. standard normal samples.
Tensor prng_gaussian(Prng& rng, const Shape& shape);

} // namespace mergelab
