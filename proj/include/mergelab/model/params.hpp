// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mergelab/core/tensor.hpp"

namespace mergelab {

/// Named parameter collection, ordered by name.
class ParamSet {
public:
    using Map = std::map<std::string, Tensor>;

    ParamSet() = default;
    explicit ParamSet(Map tensors) : tensors_(std::move(tensors)) {}

    const Map& tensors() const noexcept { return tensors_; }
    Map& tensors() noexcept { return tensors_; }

    bool contains(const std::string& name) const { return tensors_.contains(name); }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    void set(const std::string& name, Tensor value) { tensors_[name] = std::move(value); }
    std::vector<std::string> names() const;
    std::size_t size() const noexcept { return tensors_.size(); }
    std::size_t numel() const;

    /// Same names with the same shapes.
    bool compatible(const ParamSet& other) const;
    /// Throws DimensionError naming the first difference.
    void require_compatible(const ParamSet& other, const char* what) const;

    /// Order-sensitive 64-bit hash of names, shapes and value bit patterns.
    std::uint64_t fingerprint() const;

    /// Entrywise map over two compatible sets.
    ParamSet zip(const ParamSet& other, const std::function<double(double, double)>& f) const;
    ParamSet scaled(double s) const;
    ParamSet zeros_like() const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    Map tensors_;
};

ParamSet operator+(const ParamSet& a, const ParamSet& b);
ParamSet operator-(const ParamSet& a, const ParamSet& b);

std::string fingerprint_hex(std::uint64_t fp);

/// theta_i - theta_0, tagged with the fingerprint of theta_0.
struct TaskVector {
    ParamSet delta;
    std::uint64_t origin = 0;

    friend bool operator==(const TaskVector&, const TaskVector&) = default;
};

TaskVector extract_task_vector(const ParamSet& theta_i, const ParamSet& theta_0);

/// theta_0 + scale * tau. Throws ProvenanceError if tau was not extracted from
/// theta_0.
ParamSet apply(const ParamSet& theta_0, const TaskVector& tau, double scale = 1.0);

/// Throws ProvenanceError unless tau.origin matches the fingerprint.
void require_origin(const TaskVector& tau, std::uint64_t fingerprint);

} // namespace mergelab
