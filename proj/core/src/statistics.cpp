#include "esrf/statistics.hpp"

#include "esrf/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace esrf {
namespace {

double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    return sum / static_cast<double>(v.size());
}

// Resample b of v using uniforms (step b, index j) of the stream.
double resampled_mean(const std::vector<double>& v, const NoiseStream& stream, std::uint64_t b) {
    const std::size_t n = v.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        auto pick = static_cast<std::size_t>(stream.uniform(b, j) * static_cast<double>(n));
        sum += v[std::min(pick, n - 1)];
    }
    return sum / static_cast<double>(n);
}

double std_dev(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Estimate power_mean_estimate(const std::vector<double>& powered, double p, int resamples,
                             const NoiseStream& stream) {
    if (powered.empty()) {
        throw DegenerateFit("no replications to average");
    }
    Estimate out;
    out.value = std::pow(mean_of(powered), 1.0 / p);
    if (powered.size() < 2 || resamples < 2) {
        return out;
    }
    std::vector<double> boot(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        boot[static_cast<std::size_t>(b)] =
            std::pow(resampled_mean(powered, stream, static_cast<std::uint64_t>(b)), 1.0 / p);
    }
    out.se = std_dev(boot);
    return out;
}

Estimate d_estimate(const std::vector<double>& deltas, double p, int resamples,
                    const NoiseStream& stream) {
    std::vector<double> powered(deltas.size());
    std::transform(deltas.begin(), deltas.end(), powered.begin(),
                   [p](double x) { return std::pow(x, p); });
    return power_mean_estimate(powered, p, resamples, stream);
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points, double level) {
    if (points.size() < 4) {
        throw DegenerateFit("rate fit needs at least 4 points, got " + std::to_string(points.size()));
    }
    std::set<double> distinct;
    for (const auto& [m, d] : points) {
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw DegenerateFit("rate fit needs strictly positive errors");
        }
        if (!(m > 0.0)) {
            throw DegenerateFit("ensemble sizes must be positive");
        }
        distinct.insert(m);
    }
    if (distinct.size() < 2) {
        throw DegenerateFit("rate fit needs at least 2 distinct ensemble sizes");
    }
    const auto n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [m, d] : points) {
        mx += std::log(m);
        my += std::log(d);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [m, d] : points) {
        const double dx = std::log(m) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(d) - my);
    }
    RateFit fit;
    fit.points = static_cast<int>(points.size());
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (const auto& [m, d] : points) {
        const double e = std::log(d) - fit.intercept - fit.slope * std::log(m);
        sse += e * e;
    }
    const double dof = n - 2.0;
    fit.slope_se = std::sqrt(sse / dof / sxx);
    const boost::math::students_t dist(dof);
    const double t = boost::math::quantile(dist, 0.5 + 0.5 * level);
    fit.ci_low = fit.slope - t * fit.slope_se;
    fit.ci_high = fit.slope + t * fit.slope_se;
    return fit;
}

std::pair<double, double> bootstrap_slope_ci(const std::vector<double>& members,
                                             const std::vector<std::vector<double>>& powered,
                                             double p, int resamples, const NoiseStream& stream,
                                             double level) {
    if (members.size() != powered.size()) {
        throw DegenerateFit("one replication set per ensemble size required");
    }
    if (resamples < 2) {
        throw DegenerateFit("bootstrap needs at least 2 resamples");
    }
    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(resamples));
    std::vector<std::pair<double, double>> pts(members.size());
    for (int b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < members.size(); ++i) {
            // Each size gets its own block of steps so resamples stay independent.
            const auto step = static_cast<std::uint64_t>(b) * members.size() + i;
            pts[i] = {members[i], std::pow(resampled_mean(powered[i], stream, step), 1.0 / p)};
        }
        slopes.push_back(fit_rate(pts, level).slope);
    }
    const double tail = 0.5 * (1.0 - level);
    return {quantile(slopes, tail), quantile(slopes, 1.0 - tail)};
}

}  // namespace esrf
