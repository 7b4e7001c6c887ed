#include "esrf/transforms.hpp"

#include "esrf/error.hpp"

#include <cmath>

namespace esrf {
namespace {

void check_shapes(Eigen::Index d, const Matrix& h, const SymmetricMatrix& r) {
    if (h.cols() != d || h.rows() != r.dim()) {
        throw DimensionMismatch("H must be q x d with R q x q");
    }
}

Eigen::LLT<Matrix> cholesky(const Matrix& a, const char* what) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw SolveFailure(std::string(what) + " is not positive definite");
    }
    return llt;
}

// g(s) = ((1+s)^{-1/2} - 1)/s written without the cancellation at s -> 0.
double etkf_weight(double s) {
    const double root = std::sqrt(1.0 + std::max(s, 0.0));
    return -1.0 / (root * (1.0 + root));
}

}  // namespace

Matrix kalman_gain(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    check_shapes(p.dim(), h, r);
    const Matrix hp = h * p.entries();
    const Matrix innovation_cov = r.entries() + hp * h.transpose();
    const auto llt = cholesky(innovation_cov, "R + H P H^T");
    // K^T = S^{-1} H P since S and P are symmetric.
    return llt.solve(hp).transpose();
}

Matrix transform_eakf(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    check_shapes(p.dim(), h, r);
    const SymmetricMatrix root = sqrt_psd(p);
    const SymmetricMatrix root_pinv = pinv_sqrt(p);
    const SymmetricMatrix theta = observation_precision(h, r);
    const SymmetricMatrix inner =
        inv_sqrt_shifted(SymmetricMatrix::psd(root.entries() * theta.entries() * root.entries()));
    return root.entries() * inner.entries() * root_pinv.entries();
}

Matrix transform_unified(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    check_shapes(p.dim(), h, r);
    const SymmetricMatrix root = sqrt_psd(p);
    const SymmetricMatrix root_pinv = pinv_sqrt(p);
    const SymmetricMatrix theta = observation_precision(h, r);
    const SymmetricMatrix inner =
        inv_sqrt_shifted(SymmetricMatrix::psd(root.entries() * theta.entries() * root.entries()));
    const Matrix range_projector = root.entries() * root_pinv.entries();
    const Eigen::Index d = p.dim();
    return root.entries() * inner.entries() * root_pinv.entries() +
           (Matrix::Identity(d, d) - range_projector);
}

SymmetricMatrix transform_etkf(const Matrix& deviations, const Matrix& h,
                               const SymmetricMatrix& r) {
    check_shapes(deviations.rows(), h, r);
    const Eigen::Index m = deviations.cols();
    if (m < 2) {
        throw DimensionMismatch("ETKF needs at least two members");
    }
    const Matrix scaled = deviations / std::sqrt(static_cast<double>(m - 1));
    const SymmetricMatrix theta = observation_precision(h, r);
    const Matrix gram = scaled.transpose() * theta.entries() * scaled;
    return inv_sqrt_shifted(SymmetricMatrix::psd(gram));
}

Matrix apply_etkf(const Matrix& deviations, const Matrix& h, const SymmetricMatrix& r) {
    check_shapes(deviations.rows(), h, r);
    const Eigen::Index m = deviations.cols();
    if (m < 2) {
        throw DimensionMismatch("ETKF needs at least two members");
    }
    const auto llt = cholesky(r.entries(), "R");
    // Z = L^{-1} H Et with R = L L^T, so V = Z^T and V V^T = Et^T Theta Et.
    const Matrix z = llt.matrixL().solve(h * deviations) / std::sqrt(static_cast<double>(m - 1));
    const SymmetricMatrix small = SymmetricMatrix::psd(z * z.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(small.entries());
    const Vector weights = eig.eigenvalues().unaryExpr(&etkf_weight);
    const Matrix g = eig.eigenvectors() * weights.asDiagonal() * eig.eigenvectors().transpose();
    return deviations + (deviations * z.transpose()) * g * z;
}

Matrix whitaker_weight(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    check_shapes(p.dim(), h, r);
    const SymmetricMatrix innovation_cov =
        SymmetricMatrix::psd(r.entries() + h * p.entries() * h.transpose());
    cholesky(innovation_cov.entries(), "R + H P H^T");
    const SymmetricMatrix s_half = sqrt_psd(innovation_cov);
    const SymmetricMatrix s_inv_half = pinv_sqrt(innovation_cov);
    const SymmetricMatrix r_half = sqrt_psd(r);
    const auto sum = cholesky(s_half.entries() + r_half.entries(), "(R + HPH^T)^{1/2} + R^{1/2}");
    const Eigen::Index q = r.dim();
    return s_inv_half.entries() * sum.solve(Matrix::Identity(q, q));
}

Matrix whitaker_gain(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    return p.entries() * h.transpose() * whitaker_weight(p, h, r);
}

Matrix transform_whitaker(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r) {
    const Eigen::Index d = p.dim();
    return Matrix::Identity(d, d) - whitaker_gain(p, h, r) * h;
}

}  // namespace esrf
