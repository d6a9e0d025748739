#include "esda/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "esda/parallel.hpp"

namespace esda {

namespace {

std::size_t neighbor_count(double frac, std::size_t n) {
    const double target = frac * static_cast<double>(n);
    const double rounded = std::round(target);
    const double count = std::abs(target - rounded) < 1e-9 ? rounded : std::ceil(target);
    return std::clamp<std::size_t>(static_cast<std::size_t>(count), 2, n);
}

double median(std::vector<double> values) {
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (n % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

RegressionFit group_fit(const std::vector<double>& x, const std::vector<double>& y, const char* group) {
    if (x.empty()) {
        throw RegressionError(std::string("empty ") + group + " group");
    }
    try {
        return ols(x, y);
    } catch (const RegressionError& e) {
        throw RegressionError(std::string(group) + " group: " + e.what());
    }
}

}  // namespace

RegressionFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw RegressionError("x and y differ in length");
    }
    if (x.size() < 2) {
        throw RegressionError("least squares needs at least 2 observations");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) {
        throw RegressionError("constant x");
    }
    RegressionFit fit;
    fit.n = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 0.0;
    return fit;
}

SplitRegression split_regression(std::span<const double> floors, std::span<const double> scores, int threshold) {
    if (floors.size() != scores.size()) {
        throw RegressionError("floors and scores differ in length");
    }
    if (threshold < 2) {
        throw RegressionError("floor threshold must be at least 2");
    }
    std::vector<double> low_x, low_y, high_x, high_y;
    for (std::size_t i = 0; i < floors.size(); ++i) {
        if (floors[i] < threshold) {
            low_x.push_back(floors[i]);
            low_y.push_back(scores[i]);
        } else {
            high_x.push_back(floors[i]);
            high_y.push_back(scores[i]);
        }
    }
    SplitRegression out;
    out.threshold = threshold;
    out.low = group_fit(low_x, low_y, "low");
    out.high = group_fit(high_x, high_y, "high");
    out.low_share = static_cast<double>(low_x.size()) / static_cast<double>(floors.size());
    return out;
}

SplitRegression split_regression(std::span<const int> floors, std::span<const double> scores, int threshold) {
    std::vector<double> as_double(floors.begin(), floors.end());
    return split_regression(std::span<const double>(as_double), scores, threshold);
}

LowessCurve lowess(std::span<const double> x, std::span<const double> y, double frac, int iterations) {
    if (x.size() != y.size()) {
        throw RegressionError("x and y differ in length");
    }
    const std::size_t n = x.size();
    if (n < 3) {
        throw RegressionError("LOWESS needs at least 3 observations");
    }
    if (!(frac > 0.0 && frac <= 1.0)) {
        throw RegressionError("LOWESS frac must lie in (0, 1]");
    }
    if (iterations < 0) {
        throw RegressionError("LOWESS iterations must be non-negative");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw RegressionError("LOWESS input must be finite");
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] != x[b] ? x[a] < x[b] : a < b; });

    // Groups of equal x; members stay in ascending input index.
    std::vector<double> gx;
    std::vector<std::size_t> gstart;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0 || x[order[k]] != gx.back()) {
            gx.push_back(x[order[k]]);
            gstart.push_back(k);
        }
    }
    gstart.push_back(n);
    const std::size_t groups = gx.size();
    std::vector<std::size_t> group_of(n);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t k = gstart[g]; k < gstart[g + 1]; ++k) {
            group_of[order[k]] = g;
        }
    }

    const std::size_t r = neighbor_count(frac, n);
    const double x_range = gx.back() - gx.front();
    double mean_abs_y = 0.0;
    for (double v : y) {
        mean_abs_y += std::abs(v);
    }
    mean_abs_y /= static_cast<double>(n);

    std::vector<double> robustness(n, 1.0);
    std::vector<double> fitted(groups, 0.0);
    std::vector<std::size_t> chosen;
    std::vector<double> distance;
    chosen.reserve(r);
    distance.reserve(r);

    auto fit_all = [&] {
        for (std::size_t g0 = 0; g0 < groups; ++g0) {
            const double x0 = gx[g0];
            chosen.clear();
            distance.clear();
            auto take = [&](std::size_t g) {
                const double d = std::abs(gx[g] - x0);
                for (std::size_t k = gstart[g]; k < gstart[g + 1] && chosen.size() < r; ++k) {
                    chosen.push_back(order[k]);
                    distance.push_back(d);
                }
            };
            take(g0);
            std::size_t left = g0;   // next candidate is left - 1
            std::size_t right = g0 + 1;
            while (chosen.size() < r) {
                const bool has_left = left > 0;
                const bool has_right = right < groups;
                if (has_left && (!has_right || x0 - gx[left - 1] <= gx[right] - x0)) {
                    take(--left);
                } else {
                    take(right++);
                }
            }
            const double dmax = *std::max_element(distance.begin(), distance.end());
            double sw = 0.0;
            double swx = 0.0;
            double swy = 0.0;
            std::vector<double> w(chosen.size());
            for (std::size_t k = 0; k < chosen.size(); ++k) {
                double tricube = 1.0;
                if (dmax > 0.0) {
                    const double u = distance[k] / dmax;
                    const double t = 1.0 - u * u * u;
                    tricube = t * t * t;
                }
                w[k] = tricube * robustness[chosen[k]];
                sw += w[k];
                swx += w[k] * x[chosen[k]];
                swy += w[k] * y[chosen[k]];
            }
            if (!(sw > 0.0)) {
                double mean = 0.0;
                for (std::size_t k = gstart[g0]; k < gstart[g0 + 1]; ++k) {
                    mean += y[order[k]];
                }
                fitted[g0] = mean / static_cast<double>(gstart[g0 + 1] - gstart[g0]);
                continue;
            }
            const double xbar = swx / sw;
            const double ybar = swy / sw;
            double sxx = 0.0;
            double sxy = 0.0;
            for (std::size_t k = 0; k < chosen.size(); ++k) {
                const double dx = x[chosen[k]] - xbar;
                sxx += w[k] * dx * dx;
                sxy += w[k] * dx * (y[chosen[k]] - ybar);
            }
            if (std::sqrt(sxx / sw) > 1e-3 * x_range) {
                fitted[g0] = ybar + sxy / sxx * (x0 - xbar);
            } else {
                fitted[g0] = ybar;
            }
        }
    };

    fit_all();
    std::vector<double> abs_residual(n);
    for (int pass = 0; pass < iterations; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            abs_residual[i] = std::abs(y[i] - fitted[group_of[i]]);
        }
        const double s = median(abs_residual);
        if (s <= 1e-10 * mean_abs_y) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double u = abs_residual[i] / (6.0 * s);
            robustness[i] = u < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        }
        fit_all();
    }

    LowessCurve curve;
    curve.x = std::move(gx);
    curve.y = std::move(fitted);
    curve.frac = frac;
    curve.iterations = iterations;
    return curve;
}

Aggregation aggregate_neighborhoods(const std::vector<BuildingFootprint>& buildings,
                                    std::vector<NeighborhoodArea> neighborhoods, LonLat origin, unsigned threads) {
    std::sort(neighborhoods.begin(), neighborhoods.end(),
              [](const NeighborhoodArea& a, const NeighborhoodArea& b) { return a.id < b.id; });
    std::vector<MultiPolygon> planar;
    std::vector<Rect> boxes;
    planar.reserve(neighborhoods.size());
    for (const NeighborhoodArea& area : neighborhoods) {
        planar.push_back(project(area.geometry, origin));
        boxes.push_back(bounding_box(planar.back()));
    }

    // Index into `neighborhoods` (sorted by id) per building, or npos.
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> slot(buildings.size(), npos);
    parallel_for(buildings.size(), threads, [&](std::size_t b) {
        const PointXY c = buildings[b].centroid;
        for (std::size_t k = 0; k < planar.size(); ++k) {
            if (boxes[k].contains(c) && point_in_polygon(c, planar[k])) {
                slot[b] = k;
                return;
            }
        }
    });

    Aggregation out;
    std::vector<double> score_sum(neighborhoods.size(), 0.0);
    std::vector<double> floor_sum(neighborhoods.size(), 0.0);
    std::vector<std::int64_t> count(neighborhoods.size(), 0);
    out.assignment.assign(buildings.size(), -1);
    for (std::size_t b = 0; b < buildings.size(); ++b) {
        if (!buildings[b].qscore_interp) {
            ++out.missing_scores;
            continue;
        }
        if (slot[b] == npos) {
            out.unassigned.push_back(buildings[b].id);
            continue;
        }
        out.assignment[b] = neighborhoods[slot[b]].id;
        score_sum[slot[b]] += *buildings[b].qscore_interp;
        floor_sum[slot[b]] += buildings[b].floors;
        ++count[slot[b]];
    }
    out.mean_floors.resize(neighborhoods.size());
    for (std::size_t k = 0; k < neighborhoods.size(); ++k) {
        NeighborhoodArea& area = neighborhoods[k];
        area.building_count = count[k];
        if (count[k] > 0) {
            area.mean_qscore = score_sum[k] / static_cast<double>(count[k]);
            out.mean_floors[k] = floor_sum[k] / static_cast<double>(count[k]);
        } else {
            area.mean_qscore.reset();
            out.empty.push_back(area.id);
        }
    }
    out.neighborhoods = std::move(neighborhoods);
    return out;
}

}  // namespace esda
