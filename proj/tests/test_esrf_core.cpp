#include "esrf/analysis.hpp"
#include "esrf/audit.hpp"
#include "esrf/error.hpp"
#include "esrf/transforms.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace esrf;
using esrf::testing::random_matrix;
using esrf::testing::random_psd;
using esrf::testing::scalar_model;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
SymmetricMatrix sym(double v) { return SymmetricMatrix::psd(scalar(v)); }

Ensemble scalar_ensemble(std::initializer_list<double> xs) {
    Matrix m(1, static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        m(0, i++) = x;
    }
    return Ensemble(m);
}

Ensemble random_ensemble(Eigen::Index d, Eigen::Index m, std::uint64_t id, double scale = 1.0) {
    return Ensemble(scale * random_matrix(d, m, id) + Matrix::Constant(d, m, 0.3));
}

SymmetricMatrix random_r(Eigen::Index q, std::uint64_t id) {
    const Matrix g = random_matrix(q, q, id + 1000);
    return SymmetricMatrix::psd(g * g.transpose() + 0.1 * Matrix::Identity(q, q));
}

}  // namespace

TEST_CASE("ensemble statistics") {
    const Ensemble e = random_ensemble(3, 7, 1);
    CHECK(e.deviations().rowwise().sum().norm() < 1e-12);
    const double tr = e.deviations().colwise().squaredNorm().sum() / 6.0;
    CHECK(e.covariance().entries().trace() == doctest::Approx(tr).epsilon(1e-13));
    CHECK(e.covariance().is_psd());
}

TEST_CASE("forecast") {
    const auto ident = scalar_model(1.0, 0.0, 1.0, 1.0, Flavor::Discrete);
    const Ensemble e = scalar_ensemble({0.0, 2.0, 5.0});
    CHECK((forecast(e, ident, Matrix::Ones(1, 3)).members() - e.members()).norm() == 0.0);

    const auto shrink = scalar_model(0.9, 0.0, 1.0, 1.0, Flavor::Discrete);
    const Ensemble f = forecast(scalar_ensemble({0.0, 2.0}), shrink, Matrix::Random(1, 2));
    CHECK(f.member(0)(0) == 0.0);
    CHECK(f.member(1)(0) == doctest::Approx(1.8));
    CHECK(f.covariance()(0, 0) == doctest::Approx(1.62));

    const auto v = builtin_model("vec3-linear", Flavor::Discrete);
    ModelSpec spec;
    spec.name = "noiseless";
    spec.drift = LinearDrift{v.linear_drift()};
    spec.c = Matrix::Zero(3, 3);
    spec.h = v.h();
    spec.gamma = v.gamma();
    spec.initial_mean = Vector::Zero(3);
    spec.initial_cov = Matrix::Identity(3, 3);
    const StateSpaceModel lin(spec);
    const Ensemble e3 = random_ensemble(3, 6, 2);
    const Ensemble f3 = forecast(e3, lin, Matrix::Zero(3, 6));
    const Matrix& b = v.linear_drift();
    CHECK((f3.mean() - b * e3.mean()).norm() < 1e-14);
    CHECK((f3.covariance().entries() - b * e3.covariance().entries() * b.transpose()).norm() < 1e-13);
}

TEST_CASE("kalman gain") {
    CHECK(kalman_gain(SymmetricMatrix::zero(2), Matrix::Identity(2, 2), SymmetricMatrix::identity(2))
              .norm() == 0.0);
    CHECK(kalman_gain(sym(3.0), scalar(1.0), sym(1.0))(0, 0) == doctest::Approx(0.75));
    CHECK((kalman_gain(SymmetricMatrix::identity(2), Matrix::Identity(2, 2), SymmetricMatrix::identity(2)) -
           0.5 * Matrix::Identity(2, 2))
              .norm() < 1e-15);
    const SymmetricMatrix p = random_psd(4, 3);
    const Matrix h = random_matrix(2, 4, 4);
    const SymmetricMatrix r = random_r(2, 5);
    const Matrix explicit_gain =
        p.entries() * h.transpose() * (r.entries() + h * p.entries() * h.transpose()).inverse();
    CHECK((kalman_gain(p, h, r) - explicit_gain).norm() < 1e-10);
    CHECK_THROWS_AS(kalman_gain(p, h, SymmetricMatrix(-Matrix::Identity(2, 2))), SolveFailure);
}

TEST_CASE("unified transform") {
    CHECK((transform_unified(SymmetricMatrix::zero(3), Matrix::Identity(3, 3), SymmetricMatrix::identity(3)) -
           Matrix::Identity(3, 3))
              .norm() == 0.0);
    CHECK(transform_unified(sym(3.0), scalar(1.0), sym(1.0))(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("unified transform matches the integral representation") {
    // The exponential of the non-symmetric P Theta is taken directly, so this
    // checks the symmetric route independently.
    const QuadratureRule rule = gauss_laguerre_half(64);
    for (std::uint64_t id = 0; id < 5; ++id) {
        const SymmetricMatrix p = esrf::testing::random_spectrum(4, 200 + id, 0.2, 2.0);
        const Matrix h = 0.6 * random_matrix(3, 4, 300 + id);
        const SymmetricMatrix r = SymmetricMatrix::identity(3);
        const Matrix ptheta = p.entries() * observation_precision(h, r).entries();
        Matrix acc = Matrix::Zero(4, 4);
        for (Eigen::Index j = 0; j < rule.nodes.size(); ++j) {
            const Matrix arg = -rule.nodes(j) * ptheta;
            acc += rule.weights(j) * Matrix(arg.exp());
        }
        acc /= std::sqrt(std::numbers::pi);
        CHECK(spectral_norm(transform_unified(p, h, r) - acc) < 1e-7);
    }
}

TEST_CASE("adjustment transform") {
    CHECK(transform_eakf(sym(3.0), scalar(1.0), sym(1.0))(0, 0) == doctest::Approx(0.5));
    CHECK((transform_eakf(SymmetricMatrix::identity(2), Matrix::Zero(1, 2), sym(1.0)) -
           Matrix::Identity(2, 2))
              .norm() < 1e-15);
    const Matrix v = random_matrix(3, 1, 7);
    const SymmetricMatrix p = SymmetricMatrix::psd(v * v.transpose());
    const Matrix h = random_matrix(2, 3, 8);
    const SymmetricMatrix r = random_r(2, 9);
    const Matrix a = transform_eakf(p, h, r);
    const Matrix lhs = a * p.entries() * a.transpose();
    const Matrix rhs = (Matrix::Identity(3, 3) - kalman_gain(p, h, r) * h) * p.entries();
    CHECK((lhs - rhs).norm() < 1e-9);
}

TEST_CASE("ensemble-space transform") {
    const Ensemble e = random_ensemble(3, 5, 10);
    CHECK((transform_etkf(e.deviations(), Matrix::Zero(2, 3), SymmetricMatrix::identity(2)).entries() -
           Matrix::Identity(5, 5))
              .norm() < 1e-15);

    const Ensemble two = scalar_ensemble({0.0, 2.0});
    const SymmetricMatrix t = transform_etkf(two.deviations(), scalar(1.0), sym(1.0));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(t.entries());
    CHECK(eig.eigenvalues()(0) == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(eig.eigenvalues()(1) == doctest::Approx(1.0));

    for (std::uint64_t id = 0; id < 20; ++id) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(id % 5);
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(id % 9);
        const Ensemble ens = random_ensemble(d, m, 20 + id, 3.0);
        const Matrix h = random_matrix(2, d, 40 + id);
        const SymmetricMatrix tt = transform_etkf(ens.deviations(), h, random_r(2, id));
        CHECK((tt.entries() * Vector::Ones(m) - Vector::Ones(m)).lpNorm<Eigen::Infinity>() < 1e-12);
        const Matrix low = apply_etkf(ens.deviations(), h, random_r(2, id));
        CHECK((low - ens.deviations() * tt.entries()).norm() <= 1e-10 * ens.deviations().norm());
    }
}

TEST_CASE("modified gain transform") {
    CHECK((transform_whitaker(SymmetricMatrix::zero(2), Matrix::Identity(2, 2), SymmetricMatrix::identity(2)) -
           Matrix::Identity(2, 2))
              .norm() < 1e-15);
    CHECK(whitaker_gain(sym(3.0), scalar(1.0), sym(1.0))(0, 0) == doctest::Approx(0.5));
    CHECK(transform_whitaker(sym(3.0), scalar(1.0), sym(1.0))(0, 0) == doctest::Approx(0.5));
    const NoiseStream s = StreamFactory(3).stream(Purpose::Sweep, 0, 0);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const double p = 1e-3 + 100.0 * s.uniform(0, i);
        const double h = 0.1 + 2.0 * s.uniform(1, i);
        const double r = 0.1 + 2.0 * s.uniform(2, i);
        const double f = transform_whitaker(sym(p), scalar(h), sym(r))(0, 0);
        const double k = kalman_gain(sym(p), scalar(h), sym(r))(0, 0);
        CHECK(std::abs(f * f * p - (1.0 - k * h) * p) <= 1e-10 * std::max(1.0, p));
    }
}

TEST_CASE("analysis hand example") {
    const Ensemble fc = scalar_ensemble({0.0, 2.0});
    for (auto v : all_variants()) {
        const Ensemble a = analysis(fc, Vector::Constant(1, 2.0), v, scalar(1.0), sym(1.0));
        CHECK(a.mean()(0) == doctest::Approx(5.0 / 3.0));
        CHECK(a.member(0)(0) == doctest::Approx(5.0 / 3.0 - 1.0 / std::sqrt(3.0)));
        CHECK(a.member(1)(0) == doctest::Approx(5.0 / 3.0 + 1.0 / std::sqrt(3.0)));
        CHECK(a.covariance()(0, 0) == doctest::Approx(2.0 / 3.0));
    }
}

TEST_CASE("analysis without information") {
    const Ensemble collapsed(Matrix::Constant(2, 4, 1.5));
    const Matrix h = random_matrix(1, 2, 50);
    const Vector y = h * collapsed.mean();
    const Ensemble fc = random_ensemble(2, 4, 51);
    for (auto v : all_variants()) {
        const Ensemble a = analysis(collapsed, y, v, h, sym(1.0));
        CHECK((a.members() - collapsed.members()).norm() < 1e-14);
        const Ensemble blind = analysis(fc, Vector::Constant(1, 4.0), v, Matrix::Zero(1, 2), sym(1.0));
        CHECK((blind.mean() - fc.mean()).norm() < 1e-14);
        CHECK((blind.deviations() - fc.deviations()).norm() < 1e-13);
    }
}

TEST_CASE("scalar collapse of the variants") {
    for (std::uint64_t id = 0; id < 10; ++id) {
        const Ensemble fc = random_ensemble(1, 2 + static_cast<Eigen::Index>(id), 60 + id, 2.0);
        const Ensemble ref = analysis(fc, Vector::Constant(1, 0.4), TransformVariant::UnifiedT,
                                      scalar(1.3), sym(0.7));
        for (auto v : all_variants()) {
            const Ensemble a = analysis(fc, Vector::Constant(1, 0.4), v, scalar(1.3), sym(0.7));
            CHECK((a.members() - ref.members()).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("consistency and mean preservation on random ensembles") {
    for (std::uint64_t id = 0; id < 30; ++id) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(id % 6);
        const Eigen::Index m = 2 + static_cast<Eigen::Index>((id * 7) % 19);
        const Eigen::Index q = 1 + static_cast<Eigen::Index>(id % 3);
        const Ensemble fc = random_ensemble(d, m, 100 + id, 2.0);
        const Matrix h = random_matrix(q, d, 130 + id);
        const SymmetricMatrix r = random_r(q, 160 + id);
        const Matrix target =
            (Matrix::Identity(d, d) - kalman_gain(fc.covariance(), h, r) * h) * fc.covariance().entries();
        for (auto v : all_variants()) {
            const Ensemble a = analysis(fc, Vector::Zero(q), v, h, r);
            CHECK((a.covariance().entries() - target).norm() <= 1e-8 * std::max(1.0, target.norm()));
            CHECK(a.deviations().rowwise().sum().norm() < 1e-10 * std::max(1.0, fc.deviations().norm()));
        }
    }
}

TEST_CASE("variant names") {
    for (auto v : all_variants()) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK(parse_variant("ETKF") == TransformVariant::ETKF_direct);
    CHECK_FALSE(parse_variant("EnKF").has_value());
    CHECK(default_variant(10, 5) == TransformVariant::ETKF_direct);
    CHECK(default_variant(3, 5) == TransformVariant::EAKF);
}

TEST_CASE("audit on the scalar hand example") {
    const AuditReport report = audit_identities(scalar_ensemble({0.0, 2.0, 1.0 + std::sqrt(3.0)}),
                                                scalar(1.0), sym(1.0));
    CHECK(report.pass());
    CHECK(report.violations() == 0);
    for (const char* name : {"adjointness", "transform-bound", "gain-factor-bound", "gain-lipschitz",
                             "whitaker-bound", "etkf-mean", "consistency/EAKF"}) {
        REQUIRE_MESSAGE(report.find(name) != nullptr, name);
    }
    CHECK(report.find("consistency/EAKF")->residual <= 1e-10);
    CHECK(report.find("no-such-check") == nullptr);
}

TEST_CASE("audit on a collapsed ensemble") {
    const AuditReport report =
        audit_identities(Ensemble(Matrix::Constant(3, 4, 2.0)), random_matrix(2, 3, 70), random_r(2, 71));
    CHECK(report.pass());
}

TEST_CASE("audit flags a broken bound") {
    const Ensemble fc = random_ensemble(2, 5, 80);
    const AuditReport ok = audit_identities(fc, random_matrix(2, 2, 81), random_r(2, 82),
                                            random_psd(2, 83));
    CHECK(ok.pass());
    // R with a huge off-diagonal factor is not positive definite; the gain
    // solve fails and the report carries failed checks instead of throwing.
    Matrix bad(2, 2);
    bad << 1.0, 5.0, 5.0, 1.0;
    const AuditReport broken = audit_identities(fc, random_matrix(2, 2, 84), SymmetricMatrix(bad));
    CHECK_FALSE(broken.pass());
    CHECK(broken.violations() > 0);
}

TEST_CASE("randomized audit sweep") {
    SweepOptions opts;
    opts.instances = 200;
    const SweepSummary summary = audit_sweep(opts, 2);
    CHECK(summary.instances == 200);
    CHECK(summary.violations() == 0);
    const SweepInstance a = sweep_instance(opts, 17);
    const SweepInstance b = sweep_instance(opts, 17);
    CHECK((a.forecast.members() - b.forecast.members()).norm() == 0.0);
    CHECK(a.forecast.dim() <= 6);
    CHECK(a.forecast.size() <= 20);
}
