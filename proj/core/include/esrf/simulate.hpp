#pragma once

#include "esrf/model.hpp"
#include "esrf/rng.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace esrf {

/// Reference states X_0..X_N on the time grid.
struct Trajectory {
    Flavor flavor = Flavor::Discrete;
    double dt = 1.0;             // 1 for discrete time
    std::vector<double> times;   // k or t_j = j * dt, length N + 1
    Matrix states;               // d x (N + 1)
};

/// Discrete: column k-1 holds Y_k for k = 1..N.
/// Continuous: column j holds the increment dY_j over [t_j, t_{j+1}].
struct ObservationSeries {
    Flavor flavor = Flavor::Discrete;
    double dt = 1.0;
    Matrix values;  // q x N

    Eigen::Index steps() const { return values.cols(); }
};

struct Simulation {
    Trajectory truth;
    ObservationSeries observations;
};

/// X_k = B(X_{k-1}) + C w_k, Y_k = H X_k + Gamma v_k with w_k drawn from
/// `state_noise` at step k and v_k from `obs_noise` at step k.
Simulation simulate_discrete(const StateSpaceModel& model, const Vector& x0, int steps,
                             const NoiseStream& state_noise, const NoiseStream& obs_noise);

/// Euler-Maruyama on dt: X_{j+1} = X_j + B(X_j) dt + C sqrt(dt) xi_{j+1},
/// dY_j = H X_j dt + Gamma sqrt(dt) eta_{j+1}. Throws InvalidStep when dt <= 0
/// or T is not an integer multiple of dt.
Simulation simulate_continuous(const StateSpaceModel& model, const Vector& x0, double horizon,
                               double dt, const NoiseStream& state_noise,
                               const NoiseStream& obs_noise);

/// Number of Euler steps covering [0, horizon]; validates the grid.
int grid_steps(double horizon, double dt);

/// Columns: step_or_time, x_1..x_d, then y_1..y_q (discrete; empty on row 0)
/// or dy_1..dy_q (continuous; empty on the last row).
void write_csv(std::ostream& out, const Simulation& sim);

}  // namespace esrf
