#include "esrf/linalg.hpp"

#include "esrf/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace esrf {
namespace {

Matrix symmetrized(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionMismatch("symmetric matrix requires square input, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    Matrix s = 0.5 * (a + a.transpose());
    // (a + a^T)/2 is symmetric up to the order of the two addends; copy the
    // upper triangle down so the invariant holds exactly.
    s.triangularView<Eigen::StrictlyLower>() = s.transpose().triangularView<Eigen::StrictlyLower>();
    return s;
}

template <typename F>
Matrix spectral_apply(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, F&& f) {
    const Vector mapped = eig.eigenvalues().unaryExpr(f);
    return eig.eigenvectors() * mapped.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::SelfAdjointEigenSolver<Matrix> decompose_psd(const SymmetricMatrix& p) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p.entries());
    if (eig.info() != Eigen::Success) {
        throw NotPSD("eigendecomposition failed");
    }
    if (!p.is_psd() && p.dim() > 0) {
        const double lmax = eig.eigenvalues().maxCoeff();
        const double lmin = eig.eigenvalues().minCoeff();
        if (lmin < -eig_tolerance(lmax)) {
            throw NotPSD("matrix has eigenvalue " + std::to_string(lmin) + " below tolerance");
        }
    }
    return eig;
}

Matrix quadrature_sum(const Matrix& s, const QuadratureRule& rule) {
    const Eigen::Index d = s.rows();
    Matrix acc = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < rule.nodes.size(); ++j) {
        const Matrix arg = -rule.nodes(j) * s;
        acc += rule.weights(j) * Matrix(arg.exp());
    }
    return acc / std::sqrt(std::numbers::pi);
}

}  // namespace

double eig_tolerance(double lambda_max) { return 1e-10 * std::max(1.0, lambda_max); }

SymmetricMatrix::SymmetricMatrix(const Matrix& a) : entries_(symmetrized(a)) {}

SymmetricMatrix SymmetricMatrix::psd(const Matrix& a, double* clipped_mass) {
    SymmetricMatrix out(a);
    if (clipped_mass != nullptr) {
        *clipped_mass = 0.0;
    }
    if (out.dim() == 0) {
        out.psd_ = true;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.entries_);
    if (eig.info() != Eigen::Success) {
        throw NotPSD("eigendecomposition failed");
    }
    const Vector& lambda = eig.eigenvalues();
    const double lmax = lambda.maxCoeff();
    const double lmin = lambda.minCoeff();
    if (lmin < -eig_tolerance(lmax)) {
        throw NotPSD("matrix has eigenvalue " + std::to_string(lmin) + " below tolerance " +
                     std::to_string(-eig_tolerance(lmax)));
    }
    if (lmin < 0.0) {
        if (clipped_mass != nullptr) {
            *clipped_mass = -lambda.cwiseMin(0.0).sum();
        }
        out.entries_ = symmetrized(
            spectral_apply(eig, [](double l) { return std::max(l, 0.0); }));
    }
    out.psd_ = true;
    return out;
}

SymmetricMatrix SymmetricMatrix::identity(Eigen::Index dim) {
    SymmetricMatrix out(Matrix::Identity(dim, dim));
    out.psd_ = true;
    return out;
}

SymmetricMatrix SymmetricMatrix::zero(Eigen::Index dim) {
    SymmetricMatrix out(Matrix::Zero(dim, dim));
    out.psd_ = true;
    return out;
}

SymmetricMatrix sqrt_psd(const SymmetricMatrix& p) {
    if (p.dim() == 0) {
        return p;
    }
    const auto eig = decompose_psd(p);
    return SymmetricMatrix::psd(
        spectral_apply(eig, [](double l) { return std::sqrt(std::max(l, 0.0)); }));
}

SymmetricMatrix pinv_sqrt(const SymmetricMatrix& p) {
    if (p.dim() == 0) {
        return p;
    }
    const auto eig = decompose_psd(p);
    const double cutoff = kPinvCutoff * std::max(eig.eigenvalues().maxCoeff(), 0.0);
    return SymmetricMatrix(spectral_apply(eig, [cutoff](double l) {
        return (l > cutoff && l > 0.0) ? 1.0 / std::sqrt(l) : 0.0;
    }));
}

SymmetricMatrix inv_sqrt_shifted(const SymmetricMatrix& s) {
    if (s.dim() == 0) {
        return s;
    }
    const auto eig = decompose_psd(s);
    return SymmetricMatrix::psd(
        spectral_apply(eig, [](double l) { return 1.0 / std::sqrt(1.0 + std::max(l, 0.0)); }));
}

QuadratureRule gauss_laguerre_half(int nodes) {
    if (nodes < 1) {
        throw Error("quadrature needs at least one node");
    }
    // Golub-Welsch on the Jacobi matrix of the generalized Laguerre
    // polynomials with alpha = -1/2.
    constexpr double alpha = -0.5;
    Vector diag(nodes);
    Vector sub(std::max(nodes - 1, 0));
    for (int i = 0; i < nodes; ++i) {
        diag(i) = 2.0 * i + alpha + 1.0;
    }
    for (int i = 1; i < nodes; ++i) {
        sub(i - 1) = std::sqrt(i * (i + alpha));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) {
        throw Error("Gauss-Laguerre eigenproblem did not converge");
    }
    QuadratureRule rule;
    rule.nodes = eig.eigenvalues();
    // mu_0 = Gamma(alpha + 1) = sqrt(pi)
    rule.weights = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square();
    return rule;
}

SymmetricMatrix integral_inv_sqrt(const SymmetricMatrix& s, int nodes) {
    if (nodes < 4) {
        throw Error("integral_inv_sqrt needs nodes >= 4");
    }
    decompose_psd(s);
    const Matrix fine = quadrature_sum(s.entries(), gauss_laguerre_half(nodes));
    const Matrix coarse = quadrature_sum(s.entries(), gauss_laguerre_half(nodes / 2));
    const double truncation = spectral_norm(fine - coarse);
    if (truncation > kQuadTolerance) {
        throw QuadratureUnderResolved("quadrature with " + std::to_string(nodes) +
                                      " nodes under-resolved, estimated error " +
                                      std::to_string(truncation));
    }
    return SymmetricMatrix(fine);
}

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

double trace(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionMismatch("trace requires a square matrix");
    }
    return a.trace();
}

SymmetricMatrix observation_precision(const Matrix& h, const SymmetricMatrix& r) {
    if (h.rows() != r.dim()) {
        throw DimensionMismatch("H rows must match R dimension");
    }
    Eigen::LLT<Matrix> llt(r.entries());
    if (llt.info() != Eigen::Success) {
        throw SolveFailure("observation covariance R is not positive definite");
    }
    return SymmetricMatrix::psd(h.transpose() * llt.solve(h));
}

}  // namespace esrf
