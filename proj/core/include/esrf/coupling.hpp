#pragma once

#include "esrf/analysis.hpp"
#include "esrf/ensemble.hpp"
#include "esrf/kalman.hpp"
#include "esrf/model.hpp"
#include "esrf/rng.hpp"
#include "esrf/simulate.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace esrf {

/// Mean-field moments at one discrete step together with the transform
/// T(Pbar^f) that maps the forecast copies to the analysis copies.
struct LawStep {
    GaussianBelief forecast;
    GaussianBelief analysis;
    Matrix transform;
};

/// Moments of the mean-field law along a fixed observation record. Index 0
/// holds the initial law (forecast == analysis, transform == Id).
struct DiscreteLaw {
    std::vector<LawStep> steps;
    bool exact = false;
    Eigen::Index reference_members = 0;  // 0 when exact
};

struct ContinuousLaw {
    double dt = 0.0;
    std::vector<GaussianBelief> beliefs;  // t_j = j dt
    bool exact = false;
    Eigen::Index reference_members = 0;
};

/// Linear-Gaussian law: the Kalman filter moments, computed by kalman_filter().
DiscreteLaw exact_discrete_law(const StateSpaceModel& model, const ObservationSeries& obs);

/// Surrogate law for nonlinear drift: a self-propagating UnifiedT ensemble of
/// `members` particles on its own ReferenceInitial/ReferenceNoise streams.
/// Different member counts use disjoint streams.
DiscreteLaw reference_discrete_law(const StateSpaceModel& model, const ObservationSeries& obs,
                                   const StreamFactory& streams, Eigen::Index members);

/// Linear-Gaussian law: Kalman-Bucy moments from kb_integrate().
ContinuousLaw exact_continuous_law(const StateSpaceModel& model, const ObservationSeries& obs);

/// Surrogate law for nonlinear drift from a `members`-particle ensemble
/// Kalman-Bucy filter on the reference streams.
ContinuousLaw reference_continuous_law(const StateSpaceModel& model, const ObservationSeries& obs,
                                       const StreamFactory& streams, Eigen::Index members);

/// Finite ensemble X^(i) and mean-field copies Xbar^(i) driven by the same
/// noise. Member i of both systems starts from the same draw.
struct CoupledSystem {
    Ensemble ensemble;
    Matrix mf_members;  // d x M
    std::uint64_t replication = 0;
    std::uint64_t step = 0;
};

/// X_0^(i) = Xbar_0^(i) = m0 + sqrt(P0) xi_i, xi_i from the InitialState stream.
CoupledSystem init_coupled(const StateSpaceModel& model, Eigen::Index members,
                           const StreamFactory& streams, std::uint64_t replication);

/// Advances both systems by one forecast/analysis cycle with observation y and
/// the shared ModelNoise draws of step sys.step + 1. `law` is the law entry
/// for that step.
CoupledSystem step_coupled_discrete(const CoupledSystem& sys, const Vector& y,
                                    TransformVariant variant, const StateSpaceModel& model,
                                    const LawStep& law, const StreamFactory& streams);

/// Copies-only analysis step: Xbar^a = m^a + T(Pbar^f)(Xbar^f - m^f).
Matrix mean_field_analysis(const Matrix& forecast_copies, const LawStep& law);

/// One Euler-Maruyama step of both systems over [t_j, t_j + dt], sharing
/// dW^(i) = sqrt(dt) * (ModelNoise draws of step j + 1) and dy:
///   X^(i)    += B(X^(i)) dt + C dW^(i) + P^M H^T R^-1 (dy - H (X^(i) + xbar) dt / 2)
///   Xbar^(i) += B(Xbar^(i)) dt + C dW^(i) + Pbar H^T R^-1 (dy - H (Xbar^(i) + mbar) dt / 2)
/// `law` holds (mbar, Pbar) at t_j.
CoupledSystem step_coupled_continuous(const CoupledSystem& sys, const Vector& dy,
                                      const StateSpaceModel& model, double dt,
                                      const GaussianBelief& law, const StreamFactory& streams);

/// Residual statistics of one coupled state against the law moments.
struct ErrorRecord {
    double time = 0.0;
    double delta1 = 0.0;  // (1/M) sum ||r_i||
    double delta2 = 0.0;  // ((1/M) sum ||r_i||^2)^(1/2)
    double delta4 = 0.0;
    double mean_gap = 0.0;  // ||xbar - mbar||
    double cov_gap = 0.0;   // ||P - Pbar||
    double trP = 0.0;
    double trPbarM = 0.0;          // trace of the copies' empirical covariance
    double copies_mean_gap = 0.0;  // ||mbar^M - mbar||
    double copies_cov_gap = 0.0;   // ||P - Pbar^M||
    bool stopped = false;
};

ErrorRecord error_stats(const CoupledSystem& sys, const GaussianBelief& law, double time);

/// Delta^{M,p} for arbitrary p >= 1 from a d x M residual matrix.
double delta_p(const Matrix& residuals, double p);

struct ErrorSeries {
    Eigen::Index members = 0;
    std::string variant;
    std::uint64_t replication = 0;
    std::vector<ErrorRecord> records;
};

/// Columns: k_or_t, M, variant, delta2, delta4, mean_gap, cov_gap, trP, trPbarM, stopped_flag.
void write_error_csv(std::ostream& out, const ErrorSeries& series);

/// Runs the coupled discrete system over every observation and records the
/// analysis-stage statistics for k = 0..K.
ErrorSeries run_coupled_discrete(const StateSpaceModel& model, const ObservationSeries& obs,
                                 const DiscreteLaw& law, TransformVariant variant,
                                 Eigen::Index members, const StreamFactory& streams,
                                 std::uint64_t replication);

/// Runs the coupled continuous system; records every `record_every`-th grid point
/// and the last one.
ErrorSeries run_coupled_continuous(const StateSpaceModel& model, const ObservationSeries& obs,
                                   const ContinuousLaw& law, Eigen::Index members,
                                   const StreamFactory& streams, std::uint64_t replication,
                                   int record_every = 1);

/// First record index whose trace reaches n (boundary inclusive).
struct StoppingTimes {
    std::optional<std::size_t> ensemble;     // theta_n, from trP
    std::optional<std::size_t> mean_field;   // thetabar_n, from trPbarM
    std::optional<std::size_t> combined() const;
};
StoppingTimes stopping_time(const ErrorSeries& series, double n);

/// n = 10 tr(Pbar_0) + 10 T tr(Q).
double default_stopping_level(const StateSpaceModel& model, double horizon);

/// Sets stopped_flag on every record from theta_n ^ thetabar_n on.
void mark_stopped(ErrorSeries& series, double n);

/// sup of delta2^2 over records up to and including the stopping index.
double stopped_sup_delta2_sq(const ErrorSeries& series);

/// Checks on one record:
///   ||xbar - mbar|| <= Delta^{M,1} + ||mbar^M - mbar||
///   ||P - Pbar^M|| <= 2 sqrt(M/(M-1)) (sqrt(tr P) + sqrt(tr Pbar^M)) Delta^{M,2}
struct CouplingBounds {
    bool mean_triangle = false;
    bool covariance = false;
    bool power_mean = false;  // delta2 <= delta4
};
CouplingBounds coupling_bounds(const ErrorRecord& record, Eigen::Index members);

struct TraceEnvelope {
    double mean_sup_root_trace = 0.0;  // E[sup_t sqrt(tr P_t)] over the series
    double constant = 0.0;             // mean_sup_root_trace / (e^{L T} sqrt(tr Q)); NaN if tr Q = 0
    bool finite = false;
    bool zero_model_noise = false;
    bool trace_constant = false;       // only meaningful when tr Q = 0
};

TraceEnvelope trace_envelope_check(const std::vector<ErrorSeries>& series,
                                   const StateSpaceModel& model, double horizon);

}  // namespace esrf
