#include "esrf/error.hpp"
#include "esrf/linalg.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace esrf;
using esrf::testing::random_matrix;
using esrf::testing::random_psd;
using esrf::testing::random_spectrum;

namespace {

Matrix diag(std::initializer_list<double> v) {
    Vector d(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        d(i++) = x;
    }
    return d.asDiagonal();
}

}  // namespace

TEST_CASE("construction symmetrizes exactly") {
    Matrix a(2, 2);
    a << 1.0, 2.0, 2.0 + 1e-9, 3.0;
    const SymmetricMatrix s(a);
    CHECK(s(0, 1) == s(1, 0));
    CHECK_FALSE(s.is_psd());
    CHECK_THROWS_AS(SymmetricMatrix(Matrix::Zero(2, 3)), DimensionMismatch);
}

TEST_CASE("psd validation clips round-off and rejects real negatives") {
    double clipped = 0.0;
    const SymmetricMatrix ok = SymmetricMatrix::psd(diag({1.0, -1e-12}), &clipped);
    CHECK(ok.is_psd());
    CHECK(ok(1, 1) >= 0.0);
    CHECK(clipped == doctest::Approx(1e-12));
    CHECK_THROWS_AS(SymmetricMatrix::psd(diag({1.0, -1e-3})), NotPSD);
}

TEST_CASE("sqrt_psd") {
    CHECK((sqrt_psd(SymmetricMatrix::psd(diag({4.0, 9.0}))).entries() - diag({2.0, 3.0})).norm() <
          1e-15);
    CHECK(sqrt_psd(SymmetricMatrix::zero(2)).entries().norm() == 0.0);
    const SymmetricMatrix p = random_psd(5, 1);
    const Matrix s = sqrt_psd(p).entries();
    CHECK((s * s - p.entries()).norm() / p.entries().norm() < 1e-12);
    CHECK(sqrt_psd(p).is_psd());
    CHECK_THROWS_AS(sqrt_psd(SymmetricMatrix(diag({1.0, -1.0}))), NotPSD);
}

TEST_CASE("sqrt_psd is positively homogeneous") {
    const SymmetricMatrix p = random_psd(4, 2);
    for (double c : {0.0, 0.5, 3.0}) {
        const Matrix lhs = sqrt_psd(SymmetricMatrix::psd(c * c * p.entries())).entries();
        const Matrix rhs = c * sqrt_psd(p).entries();
        CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("pinv_sqrt") {
    CHECK((pinv_sqrt(SymmetricMatrix::psd(diag({4.0, 0.0}))).entries() - diag({0.5, 0.0})).norm() <
          1e-15);
    CHECK((pinv_sqrt(SymmetricMatrix::identity(3)).entries() - Matrix::Identity(3, 3)).norm() < 1e-15);
    const SymmetricMatrix p = random_psd(4, 3);
    const Matrix prod = pinv_sqrt(p).entries() * sqrt_psd(p).entries();
    CHECK((prod - Matrix::Identity(4, 4)).norm() < 1e-10);
}

TEST_CASE("pinv_sqrt on a rank-deficient matrix gives the range projector") {
    const SymmetricMatrix p = random_psd(4, 4, 2);
    const Matrix proj = sqrt_psd(p).entries() * pinv_sqrt(p).entries();
    CHECK((proj * proj - proj).norm() < 1e-8);
    CHECK(proj.trace() == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("inv_sqrt_shifted") {
    CHECK((inv_sqrt_shifted(SymmetricMatrix::zero(3)).entries() - Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK((inv_sqrt_shifted(SymmetricMatrix::psd(3.0 * Matrix::Identity(2, 2))).entries() -
           0.5 * Matrix::Identity(2, 2))
              .norm() < 1e-15);
    const SymmetricMatrix s = random_psd(4, 4);
    const Matrix t = inv_sqrt_shifted(s).entries();
    CHECK((t * t * (Matrix::Identity(4, 4) + s.entries()) - Matrix::Identity(4, 4)).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-15);
}

TEST_CASE("Gauss-Laguerre rule for t^{-1/2} e^{-t}") {
    const QuadratureRule rule = gauss_laguerre_half(16);
    CHECK(rule.weights.sum() == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    // int t^{1/2} e^{-t} dt = Gamma(3/2) = sqrt(pi)/2
    CHECK(rule.weights.dot(rule.nodes) == doctest::Approx(0.5 * std::sqrt(std::numbers::pi)).epsilon(1e-13));
}

TEST_CASE("integral_inv_sqrt") {
    CHECK((integral_inv_sqrt(SymmetricMatrix::zero(2), 8).entries() - Matrix::Identity(2, 2)).norm() <
          1e-12);
    CHECK(integral_inv_sqrt(SymmetricMatrix::psd(Matrix::Constant(1, 1, 3.0)), 64)(0, 0) ==
          doctest::Approx(0.5).epsilon(1e-8));
    const SymmetricMatrix s = random_spectrum(4, 5, 0.0, 5.0);
    CHECK(spectral_norm(integral_inv_sqrt(s, 64).entries() - inv_sqrt_shifted(s).entries()) < 1e-8);
    CHECK_THROWS_AS(integral_inv_sqrt(s, 3), Error);
}

TEST_CASE("integral_inv_sqrt detects an under-resolved spectrum") {
    const SymmetricMatrix big = SymmetricMatrix::psd(Matrix::Constant(1, 1, 1000.0));
    CHECK_THROWS_AS(integral_inv_sqrt(big, 64), QuadratureUnderResolved);
    CHECK_THROWS_AS(integral_inv_sqrt(SymmetricMatrix(-Matrix::Identity(2, 2)), 8), NotPSD);
}

TEST_CASE("oracle agreement over random spectra") {
    for (std::uint64_t id = 0; id < 20; ++id) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(id % 8);
        const SymmetricMatrix s = random_spectrum(d, 100 + id, 0.0, 5.0);
        CHECK(spectral_norm(integral_inv_sqrt(s, 64).entries() - inv_sqrt_shifted(s).entries()) < 1e-8);
    }
}

TEST_CASE("spectral_norm and trace") {
    const Matrix a = diag({1.0, -3.0});
    CHECK(spectral_norm(a) == doctest::Approx(3.0));
    CHECK(trace(a) == doctest::Approx(-2.0));
    CHECK(spectral_norm(Matrix::Zero(2, 2)) == 0.0);
    CHECK(trace(Matrix::Zero(2, 2)) == 0.0);
    CHECK_THROWS_AS(trace(Matrix::Zero(2, 3)), DimensionMismatch);
    const Matrix r = random_matrix(3, 4, 9);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r.transpose() * r);
    CHECK(std::abs(spectral_norm(r) * spectral_norm(r) - eig.eigenvalues().maxCoeff()) < 1e-10);
}

TEST_CASE("outputs flagged PSD re-validate") {
    const SymmetricMatrix p = random_psd(5, 11, 3);
    for (const SymmetricMatrix& out : {sqrt_psd(p), inv_sqrt_shifted(p)}) {
        CHECK(out.is_psd());
        CHECK_NOTHROW(SymmetricMatrix::psd(out.entries()));
    }
}

TEST_CASE("observation precision") {
    Matrix h(1, 2);
    h << 1.0, 2.0;
    const SymmetricMatrix r = SymmetricMatrix::psd(Matrix::Constant(1, 1, 2.0));
    const SymmetricMatrix theta = observation_precision(h, r);
    CHECK((theta.entries() - h.transpose() * h / 2.0).norm() < 1e-15);
    CHECK_THROWS_AS(observation_precision(h, SymmetricMatrix(Matrix::Zero(1, 1))), SolveFailure);
    CHECK_THROWS_AS(observation_precision(h, SymmetricMatrix::identity(2)), DimensionMismatch);
}
