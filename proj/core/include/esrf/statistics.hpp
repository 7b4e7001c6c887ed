#pragma once

#include "esrf/rng.hpp"

#include <utility>
#include <vector>

namespace esrf {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// D = (mean of delta_r^p)^(1/p) over replications, with a nonparametric
/// bootstrap standard error over `resamples` resamples drawn from `stream`.
Estimate d_estimate(const std::vector<double>& deltas, double p, int resamples,
                    const NoiseStream& stream);

/// Same from pre-raised values v_r = delta_r^p (e.g. stopped sup of delta^2).
Estimate power_mean_estimate(const std::vector<double>& powered, double p, int resamples,
                             const NoiseStream& stream);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0;   // Student-t interval from the residual variance
    double ci_high = 0.0;
    int points = 0;
};

/// OLS of log D on log M. Throws DegenerateFit with fewer than 4 points,
/// fewer than 2 distinct M values, or any D <= 0.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points, double level = 0.95);

/// Percentile interval of the fitted slope when the replications behind
/// every point are resampled independently. `powered[i]` holds the
/// per-replication values v_r for ensemble size `members[i]`; D = mean(v)^(1/p).
std::pair<double, double> bootstrap_slope_ci(const std::vector<double>& members,
                                             const std::vector<std::vector<double>>& powered,
                                             double p, int resamples, const NoiseStream& stream,
                                             double level = 0.95);

}  // namespace esrf
