// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/model/params.hpp"

#include <bit>
#include <cstdio>

#include "mergelab/core/error.hpp"

namespace mergelab {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

void fnv_u64(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
}

} // namespace

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DimensionError("parameter '" + name + "' not found");
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DimensionError("parameter '" + name + "' not found");
    return it->second;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [name, _] : tensors_) out.push_back(name);
    return out;
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
}

bool ParamSet::compatible(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    auto a = tensors_.begin();
    auto b = other.tensors_.begin();
    for (; a != tensors_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
    }
    return true;
}

void ParamSet::require_compatible(const ParamSet& other, const char* what) const {
    if (compatible(other)) return;
    for (const auto& [name, t] : tensors_) {
        if (!other.contains(name)) throw DimensionError(std::string(what) + ": '" + name + "' missing on one side");
        if (other.at(name).shape() != t.shape()) {
            throw DimensionError(std::string(what) + ": '" + name + "' has shapes " + shape_str(t.shape()) + " and " +
                                 shape_str(other.at(name).shape()));
        }
    }
    throw DimensionError(std::string(what) + ": parameter sets have different names");
}

std::uint64_t ParamSet::fingerprint() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, t] : tensors_) {
        fnv_bytes(h, name.data(), name.size());
        fnv_u64(h, t.rank());
        for (auto d : t.shape()) fnv_u64(h, d);
        for (double v : t.values()) fnv_u64(h, std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

ParamSet ParamSet::zip(const ParamSet& other, const std::function<double(double, double)>& f) const {
    require_compatible(other, "parameter arithmetic");
    ParamSet out = *this;
    for (auto& [name, t] : out.tensors_) {
        const Tensor& o = other.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = f(t[i], o[i]);
        t.check_finite("parameter arithmetic");
    }
    return out;
}

ParamSet ParamSet::scaled(double s) const {
    ParamSet out = *this;
    for (auto& [_, t] : out.tensors_) {
        for (auto& v : t.values()) v *= s;
        t.check_finite("parameter scaling");
    }
    return out;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : tensors_) out.set(name, Tensor::zeros(t.shape()));
    return out;
}

ParamSet operator+(const ParamSet& a, const ParamSet& b) {
    return a.zip(b, [](double x, double y) { return x + y; });
}

ParamSet operator-(const ParamSet& a, const ParamSet& b) {
    return a.zip(b, [](double x, double y) { return x - y; });
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

TaskVector extract_task_vector(const ParamSet& theta_i, const ParamSet& theta_0) {
    theta_i.require_compatible(theta_0, "extract_task_vector");
    return TaskVector{theta_i - theta_0, theta_0.fingerprint()};
}

void require_origin(const TaskVector& tau, std::uint64_t fingerprint) {
    if (tau.origin != fingerprint) {
        throw ProvenanceError("task vector was extracted from initialization " + fingerprint_hex(tau.origin) +
                              ", not " + fingerprint_hex(fingerprint));
    }
}

ParamSet apply(const ParamSet& theta_0, const TaskVector& tau, double scale) {
    require_origin(tau, theta_0.fingerprint());
    return theta_0.zip(tau.delta, [scale](double base, double d) { return base + scale * d; });
}

} // namespace mergelab
