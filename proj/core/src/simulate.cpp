#include "esrf/simulate.hpp"

#include "esrf/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace esrf {

int grid_steps(double horizon, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidStep("time step must be positive, got " + fmt::format("{}", dt));
    }
    if (!(horizon >= 0.0)) {
        throw InvalidStep("horizon must be non-negative");
    }
    const double ratio = horizon / dt;
    const double steps = std::round(ratio);
    if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
        throw InvalidStep(fmt::format("horizon {} is not a multiple of dt {}", horizon, dt));
    }
    return static_cast<int>(steps);
}

Simulation simulate_discrete(const StateSpaceModel& model, const Vector& x0, int steps,
                             const NoiseStream& state_noise, const NoiseStream& obs_noise) {
    if (steps < 1) {
        throw InvalidStep("discrete simulation needs at least one step");
    }
    if (x0.size() != model.state_dim()) {
        throw DimensionMismatch("initial state has wrong dimension");
    }
    const Eigen::Index d = model.state_dim();
    const Eigen::Index q = model.obs_dim();
    Simulation sim;
    sim.truth.flavor = sim.observations.flavor = Flavor::Discrete;
    sim.truth.states.resize(d, steps + 1);
    sim.truth.states.col(0) = x0;
    sim.truth.times.push_back(0.0);
    sim.observations.values.resize(q, steps);
    for (int k = 1; k <= steps; ++k) {
        const auto step = static_cast<std::uint64_t>(k);
        const Vector x = model.drift(sim.truth.states.col(k - 1)) +
                         model.c() * state_noise.normals(step, d);
        sim.truth.states.col(k) = x;
        sim.truth.times.push_back(static_cast<double>(k));
        sim.observations.values.col(k - 1) = model.h() * x + model.gamma() * obs_noise.normals(step, q);
    }
    return sim;
}

Simulation simulate_continuous(const StateSpaceModel& model, const Vector& x0, double horizon,
                               double dt, const NoiseStream& state_noise,
                               const NoiseStream& obs_noise) {
    const int steps = grid_steps(horizon, dt);
    if (x0.size() != model.state_dim()) {
        throw DimensionMismatch("initial state has wrong dimension");
    }
    const Eigen::Index d = model.state_dim();
    const Eigen::Index q = model.obs_dim();
    const double sqdt = std::sqrt(dt);
    Simulation sim;
    sim.truth.flavor = sim.observations.flavor = Flavor::Continuous;
    sim.truth.dt = sim.observations.dt = dt;
    sim.truth.states.resize(d, steps + 1);
    sim.truth.states.col(0) = x0;
    sim.truth.times.push_back(0.0);
    sim.observations.values.resize(q, steps);
    for (int j = 0; j < steps; ++j) {
        const auto step = static_cast<std::uint64_t>(j + 1);
        const Vector x = sim.truth.states.col(j);
        sim.observations.values.col(j) =
            model.h() * x * dt + model.gamma() * (sqdt * obs_noise.normals(step, q));
        sim.truth.states.col(j + 1) =
            x + model.drift(x) * dt + model.c() * (sqdt * state_noise.normals(step, d));
        sim.truth.times.push_back((j + 1) * dt);
    }
    return sim;
}

void write_csv(std::ostream& out, const Simulation& sim) {
    const bool discrete = sim.truth.flavor == Flavor::Discrete;
    const Eigen::Index d = sim.truth.states.rows();
    const Eigen::Index q = sim.observations.values.rows();
    out << (discrete ? "step" : "time");
    for (Eigen::Index i = 0; i < d; ++i) {
        out << ",x_" << i + 1;
    }
    for (Eigen::Index i = 0; i < q; ++i) {
        out << (discrete ? ",y_" : ",dy_") << i + 1;
    }
    out << '\n';
    const Eigen::Index rows = sim.truth.states.cols();
    for (Eigen::Index k = 0; k < rows; ++k) {
        out << fmt::format("{}", sim.truth.times[static_cast<std::size_t>(k)]);
        for (Eigen::Index i = 0; i < d; ++i) {
            out << ',' << fmt::format("{}", sim.truth.states(i, k));
        }
        // Discrete Y_k sits next to X_k (k >= 1); continuous dY_j next to X_j (j < N).
        const Eigen::Index obs_col = discrete ? k - 1 : k;
        const bool has_obs = obs_col >= 0 && obs_col < sim.observations.values.cols();
        for (Eigen::Index i = 0; i < q; ++i) {
            out << ',';
            if (has_obs) {
                out << fmt::format("{}", sim.observations.values(i, obs_col));
            }
        }
        out << '\n';
    }
}

}  // namespace esrf
