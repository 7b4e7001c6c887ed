#include "esrf/kalman.hpp"

#include "esrf/error.hpp"
#include "esrf/transforms.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace esrf {

GaussianBelief kf_predict(const GaussianBelief& belief, const Matrix& b, const SymmetricMatrix& q) {
    if (b.rows() != belief.mean.size() || b.cols() != belief.mean.size() || q.dim() != b.rows()) {
        throw DimensionMismatch("kf_predict: B and Q must match the belief dimension");
    }
    return {b * belief.mean,
            SymmetricMatrix::psd(b * belief.cov.entries() * b.transpose() + q.entries())};
}

GaussianBelief kf_update(const GaussianBelief& belief, const Vector& y, const Matrix& h,
                         const SymmetricMatrix& r) {
    if (y.size() != h.rows()) {
        throw DimensionMismatch("kf_update: observation has wrong dimension");
    }
    const Matrix gain = kalman_gain(belief.cov, h, r);
    const Eigen::Index d = belief.mean.size();
    return {belief.mean + gain * (y - h * belief.mean),
            SymmetricMatrix::psd((Matrix::Identity(d, d) - gain * h) * belief.cov.entries())};
}

KalmanPath kalman_filter(const StateSpaceModel& model, const ObservationSeries& obs) {
    if (model.flavor() != Flavor::Discrete || obs.flavor != Flavor::Discrete) {
        throw Error("kalman_filter needs a discrete model and observations");
    }
    const Matrix& b = model.linear_drift();
    KalmanPath path;
    GaussianBelief current{model.initial_mean(), model.initial_cov()};
    path.forecast.push_back(current);
    path.analysis.push_back(current);
    for (Eigen::Index k = 0; k < obs.steps(); ++k) {
        const GaussianBelief fc = kf_predict(current, b, model.q());
        current = kf_update(fc, obs.values.col(k), model.h(), model.r());
        path.forecast.push_back(fc);
        path.analysis.push_back(current);
    }
    return path;
}

GaussianBelief kb_step(const GaussianBelief& belief, const StateSpaceModel& model, const Vector& dy,
                       double dt, double* clipped) {
    if (!(dt > 0.0)) {
        throw InvalidStep(fmt::format("time step must be positive, got {}", dt));
    }
    const Matrix& b = model.linear_drift();
    const Matrix& p = belief.cov.entries();
    const Matrix bp = b * p;
    const Matrix riccati = bp + bp.transpose() + model.q().entries() -
                           p * model.theta().entries() * p;
    // P H^T R^-1 through a solve against R.
    const Eigen::LLT<Matrix> llt(model.r().entries());
    const Matrix gain = llt.solve(model.h() * p).transpose();
    double mass = 0.0;
    GaussianBelief next{belief.mean + b * belief.mean * dt +
                            gain * (dy - model.h() * belief.mean * dt),
                        SymmetricMatrix::psd(p + riccati * dt, &mass)};
    if (clipped != nullptr) {
        *clipped += mass;
    }
    return next;
}

KalmanBucyPath kb_integrate(const GaussianBelief& b0, const StateSpaceModel& model,
                            const ObservationSeries& obs, double dt, double clip_budget) {
    if (!(dt > 0.0)) {
        throw InvalidStep(fmt::format("time step must be positive, got {}", dt));
    }
    if (std::abs(obs.dt - dt) > 1e-12 * dt) {
        throw InvalidStep(fmt::format("dt {} does not match the observation grid {}", dt, obs.dt));
    }
    KalmanBucyPath path;
    path.dt = dt;
    path.beliefs.reserve(static_cast<std::size_t>(obs.steps()) + 1);
    path.beliefs.push_back(b0);
    for (Eigen::Index j = 0; j < obs.steps(); ++j) {
        path.beliefs.push_back(kb_step(path.beliefs.back(), model, obs.values.col(j), dt,
                                       &path.clipped_mass));
        if (path.clipped_mass > clip_budget) {
            throw NotPSD(fmt::format("Riccati flow clipped {} of negative eigenvalue mass by step {}",
                                     path.clipped_mass, j + 1));
        }
    }
    return path;
}

void write_beliefs_csv(std::ostream& out, const std::vector<double>& times,
                       const std::vector<GaussianBelief>& beliefs) {
    if (times.size() != beliefs.size()) {
        throw DimensionMismatch("one time per belief required");
    }
    const Eigen::Index d = beliefs.empty() ? 0 : beliefs.front().mean.size();
    out << "time";
    for (Eigen::Index i = 0; i < d; ++i) {
        out << ",m_" << i + 1;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            out << ",P_" << i + 1 << '_' << j + 1;
        }
    }
    out << '\n';
    for (std::size_t k = 0; k < beliefs.size(); ++k) {
        out << fmt::format("{}", times[k]);
        for (Eigen::Index i = 0; i < d; ++i) {
            out << ',' << fmt::format("{}", beliefs[k].mean(i));
        }
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i; j < d; ++j) {
                out << ',' << fmt::format("{}", beliefs[k].cov(i, j));
            }
        }
        out << '\n';
    }
}

}  // namespace esrf
