#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace esrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalue clipping threshold used by PSD validation: 1e-10 * max(1, lambda_max).
double eig_tolerance(double lambda_max);

/// Relative cutoff below which eigenvalues are treated as zero by pinv_sqrt.
inline constexpr double kPinvCutoff = 1e-12;

/// Acceptable truncation estimate for integral_inv_sqrt.
inline constexpr double kQuadTolerance = 1e-6;

/// Dense symmetric matrix. Construction symmetrizes the input exactly, so
/// entries(i, j) == entries(j, i) holds bit-for-bit afterwards.
///
/// A matrix built through psd() carries the PSD flag: its spectrum has been
/// checked against eig_tolerance and any tolerated negative eigenvalues have
/// been clipped to zero.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    /// Symmetrizes (A + A^T)/2; throws DimensionMismatch on non-square input.
    explicit SymmetricMatrix(const Matrix& a);

    /// Symmetrizes and validates PSD. Throws NotPSD when an eigenvalue lies
    /// below -eig_tolerance. When `clipped_mass` is given it receives the sum of
    /// the magnitudes of the clipped negative eigenvalues.
    static SymmetricMatrix psd(const Matrix& a, double* clipped_mass = nullptr);

    static SymmetricMatrix identity(Eigen::Index dim);
    static SymmetricMatrix zero(Eigen::Index dim);

    Eigen::Index dim() const { return entries_.rows(); }
    const Matrix& entries() const { return entries_; }
    bool is_psd() const { return psd_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

    // Implicit read access keeps Eigen expressions readable at call sites.
    operator const Matrix&() const { return entries_; }

private:
    Matrix entries_;
    bool psd_ = false;
};

/// Principal square root of a PSD matrix.
SymmetricMatrix sqrt_psd(const SymmetricMatrix& p);

/// Moore-Penrose pseudo-inverse of sqrt_psd(p).
SymmetricMatrix pinv_sqrt(const SymmetricMatrix& p);

/// (Id + s)^{-1/2} for PSD s.
SymmetricMatrix inv_sqrt_shifted(const SymmetricMatrix& s);

/// Oracle for inv_sqrt_shifted: (1/sqrt(pi)) * int_0^inf t^{-1/2} e^{-t} e^{-tS} dt
/// evaluated with generalized Gauss-Laguerre quadrature (alpha = -1/2).
/// Throws QuadratureUnderResolved when the `nodes` and `nodes/2` evaluations
/// differ by more than kQuadTolerance in spectral norm.
SymmetricMatrix integral_inv_sqrt(const SymmetricMatrix& s, int nodes);

/// Nodes and weights of the Gauss rule for the weight t^{-1/2} e^{-t} on [0, inf).
/// The weights sum to sqrt(pi).
struct QuadratureRule {
    Vector nodes;
    Vector weights;
};
QuadratureRule gauss_laguerre_half(int nodes);

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// Sum of the diagonal; throws DimensionMismatch for non-square input.
double trace(const Matrix& a);

/// Theta = H^T R^{-1} H via a Cholesky solve; throws SolveFailure when R is not SPD.
SymmetricMatrix observation_precision(const Matrix& h, const SymmetricMatrix& r);

}  // namespace esrf
