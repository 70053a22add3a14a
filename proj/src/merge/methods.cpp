// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/merge/methods.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"
#include "mergelab/core/svd.hpp"

namespace mergelab {

namespace merge_ops {

namespace {

void require_same_shapes(std::span<const Tensor> xs, const char* what) {
    if (xs.empty()) throw DimensionError(std::string(what) + ": no inputs");
    for (const auto& x : xs) {
        if (!x.same_shape(xs[0])) {
            throw DimensionError(std::string(what) + ": shape " + shape_str(x.shape()) + " differs from " +
                                 shape_str(xs[0].shape()));
        }
    }
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Addends in increasing magnitude: independent of input order, and negating
// or scaling every addend by a power of two scales the result exactly.
double sorted_sum(std::vector<double>& v) {
    std::sort(v.begin(), v.end(), [](double a, double b) {
        const double ma = std::abs(a), mb = std::abs(b);
        return ma != mb ? ma < mb : a < b;
    });
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

double sorted_mean(std::vector<double>& v) {
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) return v[0];
    return sorted_sum(v) / static_cast<double>(v.size());
}

// Elect sign(sum) per coordinate and average the agreeing nonzero entries.
Tensor elect_and_average(std::span<const Tensor> xs, LayerRecord* record) {
    const Tensor elected = ordered_sum(xs);
    Tensor out = Tensor::zeros(xs[0].shape());
    std::vector<double> agree;
    std::size_t nonzero = 0, matching = 0;
    for (std::size_t c = 0; c < out.size(); ++c) {
        const int s = sign_of(elected[c]);
        agree.clear();
        for (const auto& x : xs) {
            if (x[c] == 0.0) continue;
            ++nonzero;
            if (sign_of(x[c]) == s) agree.push_back(x[c]);
        }
        matching += agree.size();
        if (s == 0 || agree.empty()) continue;
        out[c] = sorted_mean(agree);
    }
    if (record) {
        record->sign_agreement = nonzero ? static_cast<double>(matching) / static_cast<double>(nonzero) : 1.0;
    }
    return out;
}

} // namespace

Tensor ordered_sum(std::span<const Tensor> xs) {
    require_same_shapes(xs, "ordered_sum");
    Tensor out = Tensor::zeros(xs[0].shape());
    std::vector<double> column(xs.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        for (std::size_t i = 0; i < xs.size(); ++i) column[i] = xs[i][c];
        out[c] = sorted_sum(column);
    }
    return out;
}

Tensor ordered_mean(std::span<const Tensor> xs) {
    require_same_shapes(xs, "ordered_mean");
    Tensor out = Tensor::zeros(xs[0].shape());
    std::vector<double> column(xs.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        for (std::size_t i = 0; i < xs.size(); ++i) column[i] = xs[i][c];
        out[c] = sorted_mean(column);
    }
    return out;
}

Tensor trim_topk(const Tensor& x, double topk) {
    if (!(topk > 0.0 && topk <= 1.0)) throw ConfigError("top-k fraction must lie in (0, 1]");
    const std::size_t n = x.size();
    // The small offset keeps products like 0.7 * 10 = 7.000000000000001 from rounding up.
    auto keep = static_cast<std::size_t>(std::ceil(topk * static_cast<double>(n) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, n);
    if (keep == n) return x;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         const double ma = std::abs(x[a]), mb = std::abs(x[b]);
                         return ma != mb ? ma > mb : a < b;
                     });
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t k = 0; k < keep; ++k) out[order[k]] = x[order[k]];
    return out;
}

Tensor ties(std::span<const Tensor> xs, double topk, LayerRecord* record) {
    require_same_shapes(xs, "ties");
    std::vector<Tensor> trimmed;
    double total = 0.0, kept = 0.0;
    for (const auto& x : xs) {
        trimmed.push_back(trim_topk(x, topk));
        for (double v : x.values()) total += std::abs(v);
        for (double v : trimmed.back().values()) kept += std::abs(v);
    }
    if (record) record->kept_mass = total > 0.0 ? kept / total : 1.0;
    return elect_and_average(trimmed, record);
}

Tensor sign_elected_mean(std::span<const Tensor> xs, LayerRecord* record) {
    require_same_shapes(xs, "sign_elected_mean");
    return elect_and_average(xs, record);
}

std::vector<double> similarity_coefficients(std::span<const Tensor> xs, double floor) {
    require_same_shapes(xs, "similarity_coefficients");
    const std::size_t n = xs.size();
    if (n < 2) throw ConfigError("similarity coefficients need at least two task vectors");
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(xs[i], xs[i]));
    std::vector<double> s(n);
    std::vector<double> cosines;
    for (std::size_t i = 0; i < n; ++i) {
        cosines.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double denom = norms[i] * norms[j];
            cosines.push_back(denom > 0.0 ? dot(xs[i], xs[j]) / denom : 0.0);
        }
        s[i] = std::max(floor, sorted_mean(cosines));
    }
    return s;
}

Tensor flatten_spectrum(const Tensor& x, double fraction, LayerRecord* record) {
    if (x.rank() != 2) throw DimensionError("flatten_spectrum needs a matrix, got " + shape_str(x.shape()));
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("common-space fraction must lie in (0, 1]");
    const SvdResult d = svd(x);
    const std::size_t r = numerical_rank(d.s);
    if (record) {
        record->spectrum.assign(d.s.values().begin(), d.s.values().end());
        record->rank = r;
    }
    if (r == 0) return Tensor::zeros(x.shape());
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(r) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, r);
    double level = 0.0;
    for (std::size_t j = 0; j < k; ++j) level += d.s[j];
    level /= static_cast<double>(k);

    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor us = Tensor::zeros({m, r});
    Tensor vr = Tensor::zeros({n, r});
    for (std::size_t j = 0; j < r; ++j) {
        const double sj = j < k ? level : d.s[j];
        for (std::size_t i = 0; i < m; ++i) us.at(i, j) = d.u.at(i, j) * sj;
        for (std::size_t i = 0; i < n; ++i) vr.at(i, j) = d.v.at(i, j);
    }
    return matmul_nt(us, vr);
}

} // namespace merge_ops

namespace {

using namespace merge_ops;

using LayerRule = std::function<Tensor(std::span<const Tensor>, LayerRecord&)>;

MergeOutput merge_layers(TaskVectors taus, const char* method, double lambda, const LayerRule& rule) {
    if (taus.empty()) throw DimensionError(std::string(method) + ": no task vectors to merge");
    if (!std::isfinite(lambda)) throw ConfigError(std::string(method) + ": scaling coefficient is not finite");
    const TaskVector& first = taus[0];
    for (const auto& t : taus) {
        if (t.origin != first.origin) {
            throw ProvenanceError(std::string(method) + ": task vectors come from different initializations");
        }
        t.delta.require_compatible(first.delta, method);
    }

    const std::vector<std::string> names = first.delta.names();
    std::vector<Tensor> merged(names.size());
    std::vector<LayerRecord> records(names.size());
    kernels::parallel_for(names.size(), [&](std::size_t l) {
        std::vector<Tensor> xs;
        xs.reserve(taus.size());
        for (const auto& t : taus) xs.push_back(t.delta.at(names[l]));
        records[l].tensor = names[l];
        Tensor out = rule(xs, records[l]);
        merged[l] = lambda == 1.0 ? std::move(out) : lambda * out;
    });

    MergeOutput result;
    result.tau.origin = first.origin;
    result.diagnostics.method = method;
    result.diagnostics.lambda = lambda;
    for (std::size_t l = 0; l < names.size(); ++l) {
        result.tau.delta.set(names[l], std::move(merged[l]));
        for (const auto& w : records[l].warnings) result.diagnostics.warnings.push_back(names[l] + ": " + w);
        result.diagnostics.layers.push_back(std::move(records[l]));
    }
    return result;
}

// [x_1 ... x_N] side by side, m x (n N).
Tensor concat_columns(std::span<const Tensor> xs) {
    const std::size_t m = xs[0].dim(0), n = xs[0].dim(1);
    Tensor c = Tensor::zeros({m, n * xs.size()});
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < n; ++j) c.at(r, i * n + j) = xs[i].at(r, j);
    return c;
}

Tensor column_block(const Tensor& a, std::size_t row0, std::size_t rows, std::size_t cols) {
    Tensor out = Tensor::zeros({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = a.at(row0 + r, c);
    return out;
}

Tensor knots_layer(std::span<const Tensor> xs, double topk, LayerRecord& rec) {
    const std::size_t m = xs[0].dim(0), n = xs[0].dim(1);
    const SvdResult d = svd(concat_columns(xs));
    const std::size_t r = numerical_rank(d.s);
    rec.spectrum.assign(d.s.values().begin(), d.s.values().end());
    rec.rank = r;
    if (r == 0) return Tensor::zeros({m, n});
    std::vector<Tensor> blocks;
    for (std::size_t i = 0; i < xs.size(); ++i) blocks.push_back(column_block(d.v, i * n, n, r));
    const Tensor v_merged = ties(blocks, topk, &rec);
    Tensor us = column_block(d.u, 0, m, r);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < r; ++j) us.at(i, j) *= d.s[j];
    return matmul_nt(us, v_merged);
}

Tensor tsvm_layer(std::span<const Tensor> xs, bool literal, LayerRecord& rec) {
    const std::size_t m = xs[0].dim(0), n = xs[0].dim(1);
    const std::size_t r = std::min(m, n);
    const SvdResult d = svd(concat_columns(xs));
    rec.spectrum.assign(d.s.values().begin(), d.s.values().end());
    rec.rank = r;
    const Tensor p = column_block(d.u, 0, m, r);
    std::vector<Tensor> projected;
    for (const auto& x : xs) projected.push_back(matmul_tn(p, x));
    const Tensor merged = literal ? ordered_mean(projected) : sign_elected_mean(projected, &rec);
    return matmul(p, merged);
}

bool is_matrix(std::span<const Tensor> xs) { return xs[0].rank() == 2; }

} // namespace

MergeOutput merge_averaging(TaskVectors taus, double lambda) {
    return merge_layers(taus, "averaging", lambda, [](std::span<const Tensor> xs, LayerRecord& rec) {
        rec.rule = "mean";
        return ordered_mean(xs);
    });
}

MergeOutput merge_ta(TaskVectors taus, double lambda) {
    return merge_layers(taus, "ta", lambda, [](std::span<const Tensor> xs, LayerRecord& rec) {
        rec.rule = "sum";
        return ordered_sum(xs);
    });
}

MergeOutput merge_ties(TaskVectors taus, double topk, double lambda) {
    return merge_layers(taus, "ties", lambda, [topk](std::span<const Tensor> xs, LayerRecord& rec) {
        rec.rule = "trim-elect-mean";
        return ties(xs, topk, &rec);
    });
}

MergeOutput merge_knots(TaskVectors taus, double topk, double lambda) {
    return merge_layers(taus, "knots", lambda, [topk](std::span<const Tensor> xs, LayerRecord& rec) {
        if (!is_matrix(xs)) {
            rec.rule = "trim-elect-mean";
            return ties(xs, topk, &rec);
        }
        rec.rule = "aligned-svd-ties";
        return knots_layer(xs, topk, rec);
    });
}

MergeOutput merge_tsvm(TaskVectors taus, double lambda, bool literal) {
    return merge_layers(taus, literal ? "tsvm-literal" : "tsvm", lambda,
                        [literal](std::span<const Tensor> xs, LayerRecord& rec) {
                            if (!is_matrix(xs)) {
                                rec.rule = literal ? "mean" : "elect-mean";
                                return literal ? ordered_mean(xs) : sign_elected_mean(xs, &rec);
                            }
                            rec.rule = literal ? "subspace-mean" : "subspace-elect-mean";
                            return tsvm_layer(xs, literal, rec);
                        });
}

MergeOutput merge_iso_c(TaskVectors taus, double lambda, bool literal) {
    return merge_layers(taus, literal ? "iso_c-literal" : "iso_c", lambda,
                        [literal](std::span<const Tensor> xs, LayerRecord& rec) {
                            if (literal || !is_matrix(xs)) {
                                rec.rule = "mean";
                                return ordered_mean(xs);
                            }
                            rec.rule = "flat-spectrum-sum";
                            return flatten_spectrum(ordered_sum(xs), 1.0, &rec);
                        });
}

MergeOutput merge_iso_cts(TaskVectors taus, double lambda, double common_fraction) {
    if (taus.size() < 2) throw ConfigError("iso_cts needs at least two task vectors");
    if (!(common_fraction > 0.0 && common_fraction <= 1.0)) {
        throw ConfigError("common-space fraction must lie in (0, 1]");
    }
    return merge_layers(taus, "iso_cts", lambda, [common_fraction](std::span<const Tensor> xs, LayerRecord& rec) {
        if (!is_matrix(xs)) {
            rec.rule = "mean";
            return ordered_mean(xs);
        }
        rec.rule = "weighted-sum-common-flat";
        const std::vector<double> s = similarity_coefficients(xs);
        rec.coefficients = s;
        constexpr double floor = 1e-3;
        if (std::all_of(s.begin(), s.end(), [](double v) { return v == floor; })) {
            rec.warnings.push_back("all similarity coefficients at the floor; weights are uniform");
        }
        std::vector<double> sorted = s;
        const double total = sorted_sum(sorted);
        const double n = static_cast<double>(xs.size());
        std::vector<Tensor> weighted;
        for (std::size_t i = 0; i < xs.size(); ++i) weighted.push_back((n * s[i] / total) * xs[i]);
        return flatten_spectrum(ordered_sum(weighted), common_fraction, &rec);
    });
}

} // namespace mergelab
