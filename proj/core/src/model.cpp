#include "esrf/model.hpp"

#include "esrf/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace esrf {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw DimensionMismatch(what);
    }
}

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
    Matrix m(static_cast<Eigen::Index>(values.size()),
             static_cast<Eigen::Index>(values.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : values) {
        Eigen::Index j = 0;
        for (double v : row) {
            m(i, j++) = v;
        }
        ++i;
    }
    return m;
}

// Shared noise/observation setup of the three-dimensional builtins.
ModelSpec vec3_base(std::string name, Flavor flavor) {
    ModelSpec spec;
    spec.name = std::move(name);
    spec.flavor = flavor;
    spec.c = rows({{0.5, 0.0, 0.0}, {0.1, 0.4, 0.0}, {0.0, 0.1, 0.3}});
    spec.h = rows({{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
    spec.gamma = rows({{0.5, 0.0}, {0.0, 0.7}});
    spec.initial_mean = Vector(3);
    spec.initial_mean << 1.0, 0.0, -1.0;
    spec.initial_cov = 0.5 * Matrix::Identity(3, 3);
    return spec;
}

StateSpaceModel scalar_linear(Flavor flavor) {
    ModelSpec spec;
    spec.name = "scalar-linear";
    spec.flavor = flavor;
    spec.drift = LinearDrift{Matrix::Constant(1, 1, flavor == Flavor::Discrete ? 0.9 : -0.5)};
    spec.c = Matrix::Ones(1, 1);
    spec.h = Matrix::Ones(1, 1);
    spec.gamma = Matrix::Ones(1, 1);
    spec.initial_mean = Vector::Zero(1);
    spec.initial_cov = Matrix::Ones(1, 1);
    return StateSpaceModel(std::move(spec));
}

StateSpaceModel vec3_linear(Flavor flavor) {
    ModelSpec spec = vec3_base("vec3-linear", flavor);
    if (flavor == Flavor::Discrete) {
        spec.drift = LinearDrift{rows({{0.8, 0.1, 0.0}, {-0.1, 0.7, 0.2}, {0.05, 0.0, 0.6}})};
    } else {
        spec.drift = LinearDrift{rows({{-0.5, 0.3, 0.0}, {-0.3, -0.4, 0.2}, {0.0, -0.1, -0.6}})};
    }
    return StateSpaceModel(std::move(spec));
}

}  // namespace

std::string_view to_string(Flavor flavor) {
    return flavor == Flavor::Discrete ? "discrete" : "continuous";
}

StateSpaceModel::StateSpaceModel(ModelSpec spec) : spec_(std::move(spec)) {
    const Eigen::Index d = spec_.c.rows();
    const Eigen::Index q = spec_.h.rows();
    require(d >= 1 && spec_.c.cols() == d, "C must be a non-empty square matrix");
    require(q >= 1 && spec_.h.cols() == d, "H must be q x d");
    require(spec_.gamma.rows() == q && spec_.gamma.cols() == q, "Gamma must be q x q");
    require(spec_.initial_mean.size() == d, "initial mean must have dimension d");
    require(spec_.initial_cov.rows() == d && spec_.initial_cov.cols() == d,
            "initial covariance must be d x d");

    lipschitz_ = std::visit(
        Overloaded{
            [d](const LinearDrift& lin) {
                require(lin.b.rows() == d && lin.b.cols() == d, "linear drift must be d x d");
                return spectral_norm(lin.b);
            },
            [d](const TanhDrift& t) {
                require(t.a.rows() == d && t.a.cols() == d, "tanh drift matrix must be d x d");
                return spectral_norm(t.a) + std::abs(t.gain);
            },
            [](const CustomDrift& c) {
                if (!c.f || c.lipschitz < 0.0) {
                    throw Error("custom drift needs a function and a non-negative Lipschitz constant");
                }
                return c.lipschitz;
            },
        },
        spec_.drift);

    q_ = SymmetricMatrix::psd(spec_.c * spec_.c.transpose());
    r_ = SymmetricMatrix::psd(spec_.gamma * spec_.gamma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r_.entries(), Eigen::EigenvaluesOnly);
    const double rmin = eig.eigenvalues().minCoeff();
    if (!(rmin > eig_tolerance(eig.eigenvalues().maxCoeff()))) {
        throw NotPSD("observation covariance R = Gamma Gamma^T must be positive definite");
    }
    theta_ = observation_precision(spec_.h, r_);
    initial_cov_ = SymmetricMatrix::psd(spec_.initial_cov);
}

Vector StateSpaceModel::drift(const Vector& x) const {
    return std::visit(Overloaded{
                          [&](const LinearDrift& lin) -> Vector { return lin.b * x; },
                          [&](const TanhDrift& t) -> Vector {
                              return t.a * x + t.gain * x.array().tanh().matrix();
                          },
                          [&](const CustomDrift& c) -> Vector { return c.f(x); },
                      },
                      spec_.drift);
}

Matrix StateSpaceModel::drift_columns(const Matrix& xs) const {
    return std::visit(Overloaded{
                          [&](const LinearDrift& lin) -> Matrix { return lin.b * xs; },
                          [&](const TanhDrift& t) -> Matrix {
                              return t.a * xs + t.gain * xs.array().tanh().matrix();
                          },
                          [&](const CustomDrift& c) -> Matrix {
                              Matrix out(xs.rows(), xs.cols());
                              for (Eigen::Index i = 0; i < xs.cols(); ++i) {
                                  out.col(i) = c.f(xs.col(i));
                              }
                              return out;
                          },
                      },
                      spec_.drift);
}

const Matrix& StateSpaceModel::linear_drift() const {
    if (const auto* lin = std::get_if<LinearDrift>(&spec_.drift)) {
        return lin->b;
    }
    throw Error("model '" + spec_.name + "' does not have a linear drift");
}

LipschitzAudit audit_lipschitz(const StateSpaceModel& model, int pairs, std::uint64_t seed) {
    const StreamFactory streams(seed);
    const Eigen::Index d = model.state_dim();
    LipschitzAudit audit;
    audit.declared = model.lipschitz_const();
    audit.pairs = pairs;
    bool violated = false;
    for (int n = 0; n < pairs; ++n) {
        const NoiseStream s = streams.stream(Purpose::Sweep, 0, static_cast<std::uint64_t>(n));
        // Mix scales so both the linear regime and the saturated regime of
        // nonlinear drifts get sampled.
        const double scale = std::pow(10.0, -2.0 + 4.0 * s.uniform(0, 0));
        const double gap = std::pow(10.0, -3.0 + 3.0 * s.uniform(0, 1));
        const Vector x = scale * s.normals(1, d);
        const Vector y = x + gap * s.normals(2, d);
        const double dx = (x - y).norm();
        if (dx == 0.0) {
            continue;
        }
        const Vector bx = model.drift(x);
        const Vector by = model.drift(y);
        const double lhs = (bx - by).norm();
        audit.max_ratio = std::max(audit.max_ratio, lhs / dx);
        // Subtracting nearby values loses digits in proportion to their size.
        const double roundoff = 8.0 * std::numeric_limits<double>::epsilon() *
                                (bx.norm() + by.norm() + audit.declared * (x.norm() + y.norm()));
        violated = violated || lhs > audit.declared * dx * (1.0 + 1e-12) + roundoff;
    }
    audit.pass = !violated;
    return audit;
}

std::vector<std::string> builtin_model_names() {
    return {"scalar-linear", "vec3-linear", "tanh-nonlinear"};
}

StateSpaceModel tanh_model(const Matrix& a, double gain, Flavor flavor) {
    require(a.rows() == 3 && a.cols() == 3, "tanh-nonlinear uses a 3 x 3 linear part");
    ModelSpec spec = vec3_base("tanh-nonlinear", flavor);
    spec.drift = TanhDrift{a, gain};
    return StateSpaceModel(std::move(spec));
}

StateSpaceModel builtin_model(std::string_view name, Flavor flavor) {
    if (name == "scalar-linear") {
        return scalar_linear(flavor);
    }
    if (name == "vec3-linear") {
        return vec3_linear(flavor);
    }
    if (name == "tanh-nonlinear") {
        if (flavor == Flavor::Discrete) {
            return tanh_model(rows({{0.5, 0.2, 0.0}, {-0.2, 0.5, 0.1}, {0.0, -0.1, 0.4}}), 0.5,
                              flavor);
        }
        return tanh_model(rows({{-1.0, 0.5, 0.0}, {-0.5, -1.0, 0.3}, {0.0, -0.3, -1.0}}), 0.8,
                          flavor);
    }
    throw UnknownModel("unknown model '" + std::string(name) + "'");
}

std::vector<StateSpaceModel> builtin_models() {
    std::vector<StateSpaceModel> out;
    for (const auto& name : builtin_model_names()) {
        out.push_back(builtin_model(name, Flavor::Discrete));
        out.push_back(builtin_model(name, Flavor::Continuous));
    }
    return out;
}

}  // namespace esrf
