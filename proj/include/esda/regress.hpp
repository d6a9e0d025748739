#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "esda/geodata.hpp"

namespace esda {

class RegressionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

/// Closed-form simple least squares of y on x.
RegressionFit ols(std::span<const double> x, std::span<const double> y);

struct SplitRegression {
    RegressionFit low;   // floors < threshold
    RegressionFit high;  // floors >= threshold
    int threshold = 8;
    double low_share = 0.0;
};

inline constexpr int kDefaultFloorThreshold = 8;

/// Separate fits below and at/above `threshold` floors.
SplitRegression split_regression(std::span<const double> floors, std::span<const double> scores,
                                 int threshold = kDefaultFloorThreshold);
SplitRegression split_regression(std::span<const int> floors, std::span<const double> scores,
                                 int threshold = kDefaultFloorThreshold);

struct LowessCurve {
    std::vector<double> x;  // distinct input x, ascending
    std::vector<double> y;  // smoothed value at x
    double frac = 0.3;
    int iterations = 3;
};

/// Cleveland's robust locally weighted linear regression.
///
/// Each fit uses the ceil(frac * n) nearest points in x (ties go to smaller
/// x, then to lower input index) with tricube weights scaled by the largest
/// distance among them. Each robustifying pass multiplies in bisquare weights
/// of the residuals over 6 * median|residual|; passes stop early once that
/// median is negligible.
LowessCurve lowess(std::span<const double> x, std::span<const double> y, double frac = 0.3, int iterations = 3);

struct Aggregation {
    std::vector<NeighborhoodArea> neighborhoods;    // mean_qscore and building_count filled
    std::vector<std::optional<double>> mean_floors; // parallel to neighborhoods
    std::vector<std::int64_t> assignment;           // per building: neighborhood id or -1
    std::vector<std::int64_t> unassigned;           // building ids outside every neighborhood
    std::vector<std::int64_t> empty;                // neighborhood ids with no buildings
    std::size_t missing_scores = 0;                 // buildings without qscore_interp
};

/// Assigns each building to the neighborhood containing its centroid (edges
/// inclusive; the lowest neighborhood id wins a tie) and averages the
/// interpolated scores per neighborhood.
Aggregation aggregate_neighborhoods(const std::vector<BuildingFootprint>& buildings,
                                    std::vector<NeighborhoodArea> neighborhoods, LonLat origin,
                                    unsigned threads = 0);

}  // namespace esda
