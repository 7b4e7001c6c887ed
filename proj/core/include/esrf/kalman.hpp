#pragma once

#include "esrf/linalg.hpp"
#include "esrf/model.hpp"
#include "esrf/simulate.hpp"

#include <iosfwd>
#include <vector>

namespace esrf {

/// Mean and covariance of a Gaussian, used both for Kalman filter states and
/// for the moments of the mean-field law.
struct GaussianBelief {
    Vector mean;
    SymmetricMatrix cov;
};

/// (B m, B P B^T + Q)
GaussianBelief kf_predict(const GaussianBelief& belief, const Matrix& b, const SymmetricMatrix& q);

/// m + K (y - H m), (Id - K H) P with K from kalman_gain().
GaussianBelief kf_update(const GaussianBelief& belief, const Vector& y, const Matrix& h,
                         const SymmetricMatrix& r);

/// Forecast and analysis beliefs of the discrete Kalman filter. Index k runs
/// over 0..K; forecast[0] and analysis[0] both hold the prior (m0, P0).
struct KalmanPath {
    std::vector<GaussianBelief> forecast;
    std::vector<GaussianBelief> analysis;
};

/// Runs kf_predict/kf_update over every observation, starting from the
/// model's initial law. Throws Error for nonlinear or continuous models.
KalmanPath kalman_filter(const StateSpaceModel& model, const ObservationSeries& obs);

/// Default tolerated total of clipped negative eigenvalue mass in kb_integrate.
inline constexpr double kPsdClipBudget = 1e-8;

/// One explicit Euler step of the Kalman-Bucy equations driven by dy:
///   P <- P + (B P + P B^T + Q - P Theta P) dt
///   m <- m + B m dt + P H^T R^-1 (dy - H m dt)
/// Adds the clipped negative eigenvalue mass to *clipped when given.
GaussianBelief kb_step(const GaussianBelief& belief, const StateSpaceModel& model, const Vector& dy,
                       double dt, double* clipped = nullptr);

struct KalmanBucyPath {
    double dt = 0.0;
    std::vector<GaussianBelief> beliefs;  // t_j = j dt, j = 0..N
    double clipped_mass = 0.0;
};

/// Integrates from b0 over every increment of `obs`. Throws InvalidStep when
/// dt <= 0 or dt differs from the observation grid, Error for nonlinear
/// drift, and NotPSD once the clipped mass exceeds `clip_budget`.
KalmanBucyPath kb_integrate(const GaussianBelief& b0, const StateSpaceModel& model,
                            const ObservationSeries& obs, double dt,
                            double clip_budget = kPsdClipBudget);

/// Columns: time, m_1..m_d, then P_ij for i <= j in row-major order.
void write_beliefs_csv(std::ostream& out, const std::vector<double>& times,
                       const std::vector<GaussianBelief>& beliefs);

}  // namespace esrf
