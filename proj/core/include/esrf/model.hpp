#pragma once

#include "esrf/linalg.hpp"
#include "esrf/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace esrf {

enum class Flavor { Discrete, Continuous };

std::string_view to_string(Flavor flavor);

/// B(x) = B x
struct LinearDrift {
    Matrix b;
};

/// B(x) = A x + gain * tanh(x), tanh applied elementwise. Globally Lipschitz
/// with constant ||A|| + |gain|.
struct TanhDrift {
    Matrix a;
    double gain = 0.0;
};

/// Arbitrary drift; the caller declares its Lipschitz constant.
struct CustomDrift {
    std::string name;
    std::function<Vector(const Vector&)> f;
    double lipschitz = 0.0;
};

using Drift = std::variant<LinearDrift, TanhDrift, CustomDrift>;

/// Everything needed to build a StateSpaceModel.
struct ModelSpec {
    std::string name;
    Flavor flavor = Flavor::Discrete;
    Drift drift;
    Matrix c;      // d x d model-noise factor, Q = C C^T
    Matrix h;      // q x d observation matrix
    Matrix gamma;  // q x q observation-noise factor, R = Gamma Gamma^T
    Vector initial_mean;
    Matrix initial_cov;
};

/// Immutable state-space model
///   discrete:   X_k = B(X_{k-1}) + C W_k,        Y_k = H X_k + Gamma V_k
///   continuous: dX  = B(X) dt + C dW,            dY  = H X dt + Gamma dV
class StateSpaceModel {
public:
    explicit StateSpaceModel(ModelSpec spec);

    const std::string& name() const { return spec_.name; }
    Flavor flavor() const { return spec_.flavor; }
    Eigen::Index state_dim() const { return spec_.c.rows(); }
    Eigen::Index obs_dim() const { return spec_.h.rows(); }

    Vector drift(const Vector& x) const;
    /// Drift applied to every column of a d x M matrix.
    Matrix drift_columns(const Matrix& xs) const;
    double lipschitz_const() const { return lipschitz_; }

    bool is_linear() const { return std::holds_alternative<LinearDrift>(spec_.drift); }
    /// Throws Error when the drift is not linear.
    const Matrix& linear_drift() const;
    const Drift& drift_kind() const { return spec_.drift; }

    const Matrix& c() const { return spec_.c; }
    const Matrix& h() const { return spec_.h; }
    const Matrix& gamma() const { return spec_.gamma; }
    const SymmetricMatrix& q() const { return q_; }
    const SymmetricMatrix& r() const { return r_; }
    const SymmetricMatrix& theta() const { return theta_; }
    const Vector& initial_mean() const { return spec_.initial_mean; }
    const SymmetricMatrix& initial_cov() const { return initial_cov_; }

private:
    ModelSpec spec_;
    SymmetricMatrix q_;
    SymmetricMatrix r_;
    SymmetricMatrix theta_;
    SymmetricMatrix initial_cov_;
    double lipschitz_ = 0.0;
};

struct LipschitzAudit {
    double declared = 0.0;
    double max_ratio = 0.0;  // max ||B(x)-B(y)|| / ||x-y|| over the sampled pairs
    int pairs = 0;
    bool pass = false;
};

/// Samples random pairs and checks ||B(x) - B(y)|| <= L ||x - y||.
LipschitzAudit audit_lipschitz(const StateSpaceModel& model, int pairs = 1000,
                               std::uint64_t seed = 0x5eed);

/// Names accepted by builtin_model().
std::vector<std::string> builtin_model_names();

/// "scalar-linear", "vec3-linear" or "tanh-nonlinear" in the requested flavor.
/// Throws UnknownModel otherwise.
StateSpaceModel builtin_model(std::string_view name, Flavor flavor);

/// Every builtin in both flavors.
std::vector<StateSpaceModel> builtin_models();

/// The tanh drift family used by "tanh-nonlinear", exposed so callers can
/// vary A and the gain while keeping the builtin noise and observation setup.
StateSpaceModel tanh_model(const Matrix& a, double gain, Flavor flavor);

}  // namespace esrf
