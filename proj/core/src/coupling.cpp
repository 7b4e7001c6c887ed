#include "esrf/coupling.hpp"

#include "esrf/error.hpp"
#include "esrf/transforms.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace esrf {
namespace {

// Stream replication index of a reference system; keeps different sizes apart.
std::uint64_t reference_tag(Eigen::Index members) {
    return static_cast<std::uint64_t>(members);
}

Matrix initial_draws(const StateSpaceModel& model, Eigen::Index members, Purpose purpose,
                     const StreamFactory& streams, std::uint64_t replication) {
    const Matrix xi = streams.member_draws(purpose, replication, members, model.state_dim(), 0);
    return (sqrt_psd(model.initial_cov()).entries() * xi).colwise() + model.initial_mean();
}

// P H^T R^{-1}, the gain of the continuous-time filters.
Matrix bucy_gain(const SymmetricMatrix& p, const StateSpaceModel& model) {
    const Eigen::LLT<Matrix> llt(model.r().entries());
    return llt.solve(model.h() * p.entries()).transpose();
}

Matrix bucy_increment(const Matrix& xs, const Vector& center, const Matrix& gain, const Vector& dy,
                      const StateSpaceModel& model, double dt) {
    const Matrix innovation =
        (-0.5 * dt * model.h() * (xs.colwise() + center)).colwise() + dy;
    return gain * innovation;
}

void check_continuous(const StateSpaceModel& model, const ObservationSeries& obs) {
    if (model.flavor() != Flavor::Continuous || obs.flavor != Flavor::Continuous) {
        throw Error("continuous coupling needs a continuous model and observation increments");
    }
}

void check_discrete(const StateSpaceModel& model, const ObservationSeries& obs) {
    if (model.flavor() != Flavor::Discrete || obs.flavor != Flavor::Discrete) {
        throw Error("discrete coupling needs a discrete model and observations");
    }
}

}  // namespace

DiscreteLaw exact_discrete_law(const StateSpaceModel& model, const ObservationSeries& obs) {
    const KalmanPath kf = kalman_filter(model, obs);
    DiscreteLaw law;
    law.exact = true;
    const Eigen::Index d = model.state_dim();
    law.steps.reserve(kf.forecast.size());
    for (std::size_t k = 0; k < kf.forecast.size(); ++k) {
        Matrix t = k == 0 ? Matrix(Matrix::Identity(d, d))
                          : transform_unified(kf.forecast[k].cov, model.h(), model.r());
        law.steps.push_back({kf.forecast[k], kf.analysis[k], std::move(t)});
    }
    return law;
}

DiscreteLaw reference_discrete_law(const StateSpaceModel& model, const ObservationSeries& obs,
                                   const StreamFactory& streams, Eigen::Index members) {
    check_discrete(model, obs);
    const std::uint64_t tag = reference_tag(members);
    const Eigen::Index d = model.state_dim();
    Ensemble ens(initial_draws(model, members, Purpose::ReferenceInitial, streams, tag));
    DiscreteLaw law;
    law.reference_members = members;
    const GaussianBelief start{ens.mean(), ens.covariance()};
    law.steps.push_back({start, start, Matrix::Identity(d, d)});
    for (Eigen::Index k = 1; k <= obs.steps(); ++k) {
        const Ensemble fc(model.drift_columns(ens.members()) +
                          model.c() * streams.member_draws(Purpose::ReferenceNoise, tag, members, d,
                                                           static_cast<std::uint64_t>(k)));
        ens = analysis(fc, obs.values.col(k - 1), TransformVariant::UnifiedT, model.h(), model.r());
        law.steps.push_back({{fc.mean(), fc.covariance()},
                             {ens.mean(), ens.covariance()},
                             transform_unified(fc.covariance(), model.h(), model.r())});
    }
    return law;
}

ContinuousLaw exact_continuous_law(const StateSpaceModel& model, const ObservationSeries& obs) {
    check_continuous(model, obs);
    ContinuousLaw law;
    law.exact = true;
    law.dt = obs.dt;
    law.beliefs = kb_integrate({model.initial_mean(), model.initial_cov()}, model, obs, obs.dt).beliefs;
    return law;
}

ContinuousLaw reference_continuous_law(const StateSpaceModel& model, const ObservationSeries& obs,
                                       const StreamFactory& streams, Eigen::Index members) {
    check_continuous(model, obs);
    const std::uint64_t tag = reference_tag(members);
    const Eigen::Index d = model.state_dim();
    const double dt = obs.dt;
    const double root_dt = std::sqrt(dt);
    Ensemble ens(initial_draws(model, members, Purpose::ReferenceInitial, streams, tag));
    ContinuousLaw law;
    law.dt = dt;
    law.reference_members = members;
    law.beliefs.reserve(static_cast<std::size_t>(obs.steps()) + 1);
    law.beliefs.push_back({ens.mean(), ens.covariance()});
    for (Eigen::Index j = 0; j < obs.steps(); ++j) {
        const Matrix dw = root_dt * streams.member_draws(Purpose::ReferenceNoise, tag, members, d,
                                                         static_cast<std::uint64_t>(j + 1));
        const Matrix& xs = ens.members();
        Matrix next = xs + model.drift_columns(xs) * dt + model.c() * dw +
                      bucy_increment(xs, ens.mean(), bucy_gain(ens.covariance(), model),
                                     obs.values.col(j), model, dt);
        ens = Ensemble(std::move(next));
        law.beliefs.push_back({ens.mean(), ens.covariance()});
    }
    return law;
}

CoupledSystem init_coupled(const StateSpaceModel& model, Eigen::Index members,
                           const StreamFactory& streams, std::uint64_t replication) {
    Matrix x0 = initial_draws(model, members, Purpose::InitialState, streams, replication);
    Ensemble ens(x0);
    return {std::move(ens), std::move(x0), replication, 0};
}

Matrix mean_field_analysis(const Matrix& forecast_copies, const LawStep& law) {
    return (law.transform * (forecast_copies.colwise() - law.forecast.mean)).colwise() +
           law.analysis.mean;
}

CoupledSystem step_coupled_discrete(const CoupledSystem& sys, const Vector& y,
                                    TransformVariant variant, const StateSpaceModel& model,
                                    const LawStep& law, const StreamFactory& streams) {
    const std::uint64_t k = sys.step + 1;
    const Matrix draws = streams.member_draws(Purpose::ModelNoise, sys.replication,
                                              sys.ensemble.size(), sys.ensemble.dim(), k);
    const Ensemble fc = forecast(sys.ensemble, model, draws);
    Ensemble analyzed = analysis(fc, y, variant, model.h(), model.r());
    const Matrix mf_forecast = model.drift_columns(sys.mf_members) + model.c() * draws;
    return {std::move(analyzed), mean_field_analysis(mf_forecast, law), sys.replication, k};
}

CoupledSystem step_coupled_continuous(const CoupledSystem& sys, const Vector& dy,
                                      const StateSpaceModel& model, double dt,
                                      const GaussianBelief& law, const StreamFactory& streams) {
    if (!(dt > 0.0)) {
        throw InvalidStep(fmt::format("time step must be positive, got {}", dt));
    }
    const std::uint64_t j = sys.step + 1;
    const Matrix dw = std::sqrt(dt) * streams.member_draws(Purpose::ModelNoise, sys.replication,
                                                           sys.ensemble.size(), sys.ensemble.dim(), j);
    const Matrix noise = model.c() * dw;
    const Matrix& xs = sys.ensemble.members();
    Matrix next = xs + model.drift_columns(xs) * dt + noise +
                  bucy_increment(xs, sys.ensemble.mean(), bucy_gain(sys.ensemble.covariance(), model),
                                 dy, model, dt);
    const Matrix& bars = sys.mf_members;
    Matrix next_bars = bars + model.drift_columns(bars) * dt + noise +
                       bucy_increment(bars, law.mean, bucy_gain(law.cov, model), dy, model, dt);
    return {Ensemble(std::move(next)), std::move(next_bars), sys.replication, j};
}

double delta_p(const Matrix& residuals, double p) {
    const Vector norms = residuals.colwise().norm();
    const auto m = static_cast<double>(norms.size());
    return std::pow(norms.array().pow(p).sum() / m, 1.0 / p);
}

ErrorRecord error_stats(const CoupledSystem& sys, const GaussianBelief& law, double time) {
    const Ensemble& ens = sys.ensemble;
    const Matrix residuals = ens.members() - sys.mf_members;
    const Vector norms = residuals.colwise().norm();
    const auto m = static_cast<double>(ens.size());
    const Vector copies_mean = sys.mf_members.rowwise().sum() / m;
    const SymmetricMatrix copies_cov = empirical_covariance(sys.mf_members);

    ErrorRecord rec;
    rec.time = time;
    rec.delta1 = norms.sum() / m;
    rec.delta2 = std::sqrt(norms.squaredNorm() / m);
    rec.delta4 = std::pow(norms.array().pow(4).sum() / m, 0.25);
    rec.mean_gap = (ens.mean() - law.mean).norm();
    rec.cov_gap = spectral_norm(ens.covariance().entries() - law.cov.entries());
    rec.trP = trace(ens.covariance());
    rec.trPbarM = trace(copies_cov);
    rec.copies_mean_gap = (copies_mean - law.mean).norm();
    rec.copies_cov_gap = spectral_norm(ens.covariance().entries() - copies_cov.entries());
    return rec;
}

void write_error_csv(std::ostream& out, const ErrorSeries& series) {
    out << "k_or_t,M,variant,delta2,delta4,mean_gap,cov_gap,trP,trPbarM,stopped_flag\n";
    for (const auto& r : series.records) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.time, series.members, series.variant,
                           r.delta2, r.delta4, r.mean_gap, r.cov_gap, r.trP, r.trPbarM,
                           r.stopped ? 1 : 0);
    }
}

ErrorSeries run_coupled_discrete(const StateSpaceModel& model, const ObservationSeries& obs,
                                 const DiscreteLaw& law, TransformVariant variant,
                                 Eigen::Index members, const StreamFactory& streams,
                                 std::uint64_t replication) {
    check_discrete(model, obs);
    if (law.steps.size() != static_cast<std::size_t>(obs.steps()) + 1) {
        throw DimensionMismatch("law length does not match the observation record");
    }
    ErrorSeries series;
    series.members = members;
    series.variant = std::string(to_string(variant));
    series.replication = replication;
    series.records.reserve(law.steps.size());
    CoupledSystem sys = init_coupled(model, members, streams, replication);
    series.records.push_back(error_stats(sys, law.steps[0].analysis, 0.0));
    for (Eigen::Index k = 1; k <= obs.steps(); ++k) {
        const auto& step = law.steps[static_cast<std::size_t>(k)];
        sys = step_coupled_discrete(sys, obs.values.col(k - 1), variant, model, step, streams);
        series.records.push_back(error_stats(sys, step.analysis, static_cast<double>(k)));
    }
    return series;
}

ErrorSeries run_coupled_continuous(const StateSpaceModel& model, const ObservationSeries& obs,
                                   const ContinuousLaw& law, Eigen::Index members,
                                   const StreamFactory& streams, std::uint64_t replication,
                                   int record_every) {
    check_continuous(model, obs);
    if (law.beliefs.size() != static_cast<std::size_t>(obs.steps()) + 1) {
        throw DimensionMismatch("law length does not match the observation record");
    }
    if (record_every < 1) {
        throw ConfigError("record_every must be positive");
    }
    ErrorSeries series;
    series.members = members;
    series.variant = "EnKBF";
    series.replication = replication;
    CoupledSystem sys = init_coupled(model, members, streams, replication);
    series.records.push_back(error_stats(sys, law.beliefs[0], 0.0));
    const Eigen::Index n = obs.steps();
    for (Eigen::Index j = 0; j < n; ++j) {
        sys = step_coupled_continuous(sys, obs.values.col(j), model, obs.dt,
                                      law.beliefs[static_cast<std::size_t>(j)], streams);
        const Eigen::Index idx = j + 1;
        if (idx % record_every == 0 || idx == n) {
            series.records.push_back(error_stats(sys, law.beliefs[static_cast<std::size_t>(idx)],
                                                 static_cast<double>(idx) * obs.dt));
        }
    }
    return series;
}

std::optional<std::size_t> StoppingTimes::combined() const {
    if (ensemble && mean_field) {
        return std::min(*ensemble, *mean_field);
    }
    return ensemble ? ensemble : mean_field;
}

StoppingTimes stopping_time(const ErrorSeries& series, double n) {
    StoppingTimes out;
    for (std::size_t i = 0; i < series.records.size(); ++i) {
        const auto& r = series.records[i];
        if (!out.ensemble && r.trP >= n) {
            out.ensemble = i;
        }
        if (!out.mean_field && r.trPbarM >= n) {
            out.mean_field = i;
        }
    }
    return out;
}

double default_stopping_level(const StateSpaceModel& model, double horizon) {
    return 10.0 * trace(model.initial_cov()) + 10.0 * horizon * trace(model.q());
}

void mark_stopped(ErrorSeries& series, double n) {
    const auto stop = stopping_time(series, n).combined();
    for (std::size_t i = 0; i < series.records.size(); ++i) {
        series.records[i].stopped = stop && i >= *stop;
    }
}

double stopped_sup_delta2_sq(const ErrorSeries& series) {
    double sup = 0.0;
    for (const auto& r : series.records) {
        sup = std::max(sup, r.delta2 * r.delta2);
        if (r.stopped) {
            break;
        }
    }
    return sup;
}

CouplingBounds coupling_bounds(const ErrorRecord& r, Eigen::Index members) {
    constexpr double slack = 1e-12;
    const auto m = static_cast<double>(members);
    CouplingBounds out;
    out.mean_triangle = r.mean_gap <= (r.delta1 + r.copies_mean_gap) * (1.0 + slack) + slack;
    const double cov_bound =
        2.0 * std::sqrt(m / (m - 1.0)) * (std::sqrt(r.trP) + std::sqrt(r.trPbarM)) * r.delta2;
    out.covariance = r.copies_cov_gap <= cov_bound * (1.0 + slack) + slack;
    out.power_mean = r.delta2 <= r.delta4 * (1.0 + slack) + slack;
    return out;
}

TraceEnvelope trace_envelope_check(const std::vector<ErrorSeries>& series,
                                   const StateSpaceModel& model, double horizon) {
    TraceEnvelope env;
    if (series.empty()) {
        return env;
    }
    double total = 0.0;
    bool constant = true;
    for (const auto& s : series) {
        double sup = 0.0;
        for (const auto& r : s.records) {
            sup = std::max(sup, std::sqrt(std::max(r.trP, 0.0)));
            if (!s.records.empty() &&
                std::abs(r.trP - s.records.front().trP) > 1e-9 * std::max(1.0, s.records.front().trP)) {
                constant = false;
            }
        }
        total += sup;
    }
    env.mean_sup_root_trace = total / static_cast<double>(series.size());
    const double tr_q = trace(model.q());
    env.zero_model_noise = tr_q == 0.0;
    env.trace_constant = constant;
    env.constant = env.zero_model_noise
                       ? std::numeric_limits<double>::quiet_NaN()
                       : env.mean_sup_root_trace /
                             (std::exp(model.lipschitz_const() * horizon) * std::sqrt(tr_q));
    env.finite = std::isfinite(env.mean_sup_root_trace) &&
                 (env.zero_model_noise || std::isfinite(env.constant));
    return env;
}

}  // namespace esrf
