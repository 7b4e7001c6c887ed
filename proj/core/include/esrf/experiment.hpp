#pragma once

#include "esrf/config.hpp"
#include "esrf/coupling.hpp"
#include "esrf/output.hpp"
#include "esrf/audit.hpp"
#include "esrf/spde_audit.hpp"
#include "esrf/statistics.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace esrf {

std::string_view library_version();

struct RatePoint {
    Eigen::Index members = 0;
    double d = 0.0;
    double se = 0.0;
};

/// Result of a reference-size doubling check for surrogate laws.
struct ReferenceCheck {
    Eigen::Index members = 0;   // ensemble size that was rerun
    Eigen::Index m_ref = 0;
    double d = 0.0;             // with m_ref
    double d_doubled = 0.0;     // with 2 m_ref
    double se = 0.0;
    bool pass = false;          // |d_doubled - d| < 1.96 se
};

struct RateReport {
    std::string experiment;
    std::string model;
    std::string variant;
    int p = 2;
    std::vector<RatePoint> points;
    RateFit fit;
    std::pair<double, double> slope_ci{0.0, 0.0};  // bootstrap percentile interval
    double band_low = 0.0;
    double band_high = 0.0;
    std::optional<double> stopped_fraction;
    std::optional<ReferenceCheck> reference;
    bool pass = false;
};

/// JSON with fields experiment, model, variant, points[{M, D, se}], slope,
/// slope_ci, pass, followed by supporting details.
std::string to_json(const RateReport& report);

struct ConsistencyRow {
    std::string variant;
    int step = 0;
    double mean_error = 0.0;
    double mean_se = 0.0;
    double cov_error = 0.0;
    double cov_se = 0.0;
    bool pass = false;
};

struct RunResult {
    bool pass = false;
    std::string summary;
    OutputSet outputs;
    std::vector<RateReport> reports;
    std::vector<ConsistencyRow> consistency;
    std::optional<SweepSummary> transforms;
    std::optional<SpdeSweepSummary> spde;
};

/// Runs the experiment and collects every artifact in memory; nothing is
/// written to disk. Results do not depend on `workers`.
RunResult run_experiment(const ExperimentConfig& config, int workers);

/// The fixed truth and observation record of an experiment (replication 0
/// of the TruthState/TruthObservation streams, x0 ~ N(m0, P0)).
Simulation experiment_truth(const StateSpaceModel& model, const ExperimentConfig& config);

/// Delta^{M,p} of a record for p in {1, 2, 4}.
double record_delta(const ErrorRecord& record, int p);

}  // namespace esrf
