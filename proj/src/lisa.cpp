#include "esda/lisa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "esda/parallel.hpp"
#include "esda/random.hpp"

namespace esda {

namespace {

void check_dimensions(std::span<const double> z, const SpatialWeights& w) {
    if (z.size() != w.n) {
        throw LisaError("dimension mismatch: " + std::to_string(z.size()) + " values for " + std::to_string(w.n) +
                        " observations");
    }
}

void check_standardized(const SpatialWeights& w) {
    if (!w.standardized) {
        throw LisaError("local Moran requires row-standardized weights");
    }
}

double lag_of(std::size_t i, std::span<const double> z, const SpatialWeights& w) {
    double lag = 0.0;
    const auto& nbrs = w.neighbors[i];
    const auto& wts = w.weights[i];
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
        lag += wts[k] * z[nbrs[k]];
    }
    return lag;
}

}  // namespace

std::string_view to_string(ClusterClass c) {
    switch (c) {
        case ClusterClass::high_high: return "HH";
        case ClusterClass::low_low: return "LL";
        case ClusterClass::low_high: return "LH";
        case ClusterClass::high_low: return "HL";
        case ClusterClass::isolate: return "ISOLATE";
        case ClusterClass::not_significant: break;
    }
    return "NS";
}

ClusterClass cluster_from_string(std::string_view s) {
    if (s == "HH") return ClusterClass::high_high;
    if (s == "LL") return ClusterClass::low_low;
    if (s == "LH") return ClusterClass::low_high;
    if (s == "HL") return ClusterClass::high_low;
    if (s == "ISOLATE") return ClusterClass::isolate;
    if (s == "NS") return ClusterClass::not_significant;
    throw LisaError("unknown cluster class '" + std::string(s) + "'");
}

std::vector<double> standardize(std::span<const double> values) {
    if (values.size() < 2) {
        throw LisaError("standardize needs at least 2 values");
    }
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    double scale = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw LisaError("non-finite attribute value");
        }
        mean += v;
        scale = std::max(scale, std::abs(v));
    }
    mean /= n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * scale)) {
        throw LisaError("constant attribute");
    }
    std::vector<double> z(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        z[i] = (values[i] - mean) / sd;
    }
    return z;
}

std::vector<LocalMoran> local_moran(std::span<const double> z, const SpatialWeights& w) {
    check_dimensions(z, w);
    check_standardized(w);
    std::vector<LocalMoran> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (w.is_isolate(i)) {
            continue;
        }
        const double lag = lag_of(i, z, w);
        out[i] = {z[i] * lag, lag};
    }
    return out;
}

double global_moran(std::span<const double> z, const SpatialWeights& w) {
    check_dimensions(z, w);
    double s0 = 0.0;
    double cross = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < w.n; ++i) {
        s0 += w.row_sum(i);
        cross += z[i] * lag_of(i, z, w);
        ss += z[i] * z[i];
    }
    if (s0 == 0.0 || ss == 0.0) {
        throw LisaError("global Moran undefined: no links or no variance");
    }
    return static_cast<double>(w.n) / s0 * cross / ss;
}

std::vector<PermutationSummary> permutation_test(std::span<const double> values, const SpatialWeights& w,
                                                 std::size_t n_perm, std::uint64_t seed, unsigned threads) {
    if (n_perm < 1) {
        throw LisaError("n_perm must be at least 1");
    }
    check_dimensions(values, w);
    check_standardized(w);
    const std::vector<double> z = standardize(values);
    const std::size_t n = z.size();
    std::vector<PermutationSummary> out(n);

    parallel_for(n, threads, [&](std::size_t i) {
        const auto& wts = w.weights[i];
        const std::size_t k = wts.size();
        if (k == 0) {
            out[i] = {1.0, 0.0, 0.0};
            return;
        }
        const double observed = z[i] * lag_of(i, z, w);
        const double eps = 1e-12 * std::max(1.0, std::abs(observed));

        std::vector<std::size_t> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                others.push_back(j);
            }
        }
        Rng rng(stream_seed(seed, i));
        std::size_t extreme = 0;
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t p = 0; p < n_perm; ++p) {
            // Partial Fisher-Yates: the first k slots become a uniform sample.
            double lag = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                const std::size_t r = t + static_cast<std::size_t>(rng.below(others.size() - t));
                std::swap(others[t], others[r]);
                lag += wts[t] * z[others[t]];
            }
            const double stat = z[i] * lag;
            if (observed >= 0.0 ? stat >= observed - eps : stat <= observed + eps) {
                ++extreme;
            }
            const double delta = stat - mean;
            mean += delta / static_cast<double>(p + 1);
            m2 += delta * (stat - mean);
        }
        out[i].pseudo_p = static_cast<double>(extreme + 1) / static_cast<double>(n_perm + 1);
        out[i].permuted_mean = mean;
        out[i].permuted_sd = n_perm > 1 ? std::sqrt(m2 / static_cast<double>(n_perm - 1)) : 0.0;
    });
    return out;
}

ClusterClass classify(double z, double lag, double pseudo_p, double alpha, bool isolate) {
    if (isolate) {
        return ClusterClass::isolate;
    }
    if (pseudo_p > alpha) {
        return ClusterClass::not_significant;
    }
    if (z > 0.0 && lag > 0.0) return ClusterClass::high_high;
    if (z < 0.0 && lag < 0.0) return ClusterClass::low_low;
    if (z < 0.0 && lag > 0.0) return ClusterClass::low_high;
    if (z > 0.0 && lag < 0.0) return ClusterClass::high_low;
    return ClusterClass::not_significant;
}

std::vector<LisaResult> run_lisa(std::span<const double> values, const SpatialWeights& w, const LisaOptions& options) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw LisaError("alpha must lie in (0, 1)");
    }
    check_dimensions(values, w);
    const SpatialWeights standardized = w.standardized ? w : row_standardize(w);
    const std::vector<double> z = standardize(values);
    const std::vector<LocalMoran> moran = local_moran(z, standardized);
    const std::vector<PermutationSummary> perm =
        permutation_test(values, standardized, options.n_perm, options.seed, options.threads);
    const double n1 = static_cast<double>(values.size() - 1);

    std::vector<LisaResult> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        LisaResult& r = out[i];
        r.observation_id = static_cast<std::int64_t>(i);
        r.z = z[i];
        r.lag = moran[i].lag;
        r.local_i = moran[i].local_i;
        r.expected_i = -standardized.row_sum(i) / n1;
        r.pseudo_p = perm[i].pseudo_p;
        r.permuted_mean = perm[i].permuted_mean;
        r.permuted_sd = perm[i].permuted_sd;
        r.cluster = classify(r.z, r.lag, r.pseudo_p, options.alpha, standardized.is_isolate(i));
    }
    return out;
}

}  // namespace esda
