#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "esda/weights.hpp"

namespace esda {

class LisaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ClusterClass { not_significant, high_high, low_low, low_high, high_low, isolate };

/// "HH", "LL", "LH", "HL", "NS" or "ISOLATE".
std::string_view to_string(ClusterClass c);
ClusterClass cluster_from_string(std::string_view s);

/// z-scores with the population standard deviation. Throws LisaError
/// ("constant attribute") when the values do not vary.
std::vector<double> standardize(std::span<const double> values);

struct LocalMoran {
    double local_i = 0.0;
    double lag = 0.0;
};

/// lag_i = sum_j w_ij z_j and I_i = z_i * lag_i. Isolates get zeros.
std::vector<LocalMoran> local_moran(std::span<const double> z, const SpatialWeights& w);

/// Global Moran's I computed directly from the weight matrix.
double global_moran(std::span<const double> z, const SpatialWeights& w);

struct PermutationSummary {
    double pseudo_p = 1.0;
    double permuted_mean = 0.0;  // mean of the permuted local statistics
    double permuted_sd = 0.0;
};

/// Conditional permutation inference for local Moran's I.
///
/// For each observation i the value z_i stays put while n_perm random draws
/// (without replacement) of the other n-1 z-values fill i's neighbor slots.
/// R_i counts permuted statistics at least as extreme as the observed one on
/// the observed side of zero, and pseudo_p = (R_i + 1) / (n_perm + 1).
/// Observation i draws from its own stream seeded by (seed, i), so results
/// do not depend on `threads`. Isolates report pseudo_p = 1.
std::vector<PermutationSummary> permutation_test(std::span<const double> values, const SpatialWeights& w,
                                                 std::size_t n_perm, std::uint64_t seed, unsigned threads = 0);

ClusterClass classify(double z, double lag, double pseudo_p, double alpha, bool isolate = false);

struct LisaResult {
    std::int64_t observation_id = 0;
    double z = 0.0;
    double lag = 0.0;
    double local_i = 0.0;
    double expected_i = 0.0;
    double pseudo_p = 1.0;
    ClusterClass cluster = ClusterClass::not_significant;
    double permuted_mean = 0.0;
    double permuted_sd = 0.0;
};

struct LisaOptions {
    std::size_t n_perm = 999;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// standardize -> local_moran -> permutation_test -> classify. Weights are
/// row-standardized first if they are not already.
std::vector<LisaResult> run_lisa(std::span<const double> values, const SpatialWeights& w,
                                 const LisaOptions& options = {});

}  // namespace esda
