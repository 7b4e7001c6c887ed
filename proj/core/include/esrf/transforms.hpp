#pragma once

#include "esrf/linalg.hpp"

namespace esrf {

/// K(P) = P H^T (R + H P H^T)^{-1}, computed with a Cholesky solve.
/// Throws SolveFailure when R + H P H^T is not positive definite.
Matrix kalman_gain(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

/// Unified state-space transform T(P). On range(P) it equals
/// sqrt(P) (Id + sqrt(P) Theta sqrt(P))^{-1/2} sqrt(P)^+, i.e. the integral
/// (1/sqrt(pi)) int t^{-1/2} e^{-t} e^{-t P Theta} dt restricted there; on
/// ker(P) it is the identity.
Matrix transform_unified(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

/// Adjustment-filter matrix A = sqrt(P) (Id + sqrt(P) Theta sqrt(P))^{-1/2} sqrt(P)^+.
Matrix transform_eakf(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

/// Ensemble-space transform T = (Id_M + Et^T Theta Et)^{-1/2}, Et = E / sqrt(M-1),
/// formed densely (M x M).
SymmetricMatrix transform_etkf(const Matrix& deviations, const Matrix& h,
                               const SymmetricMatrix& r);

/// E T without forming the M x M matrix. With V = Et^T H^T R^{-1/2},
/// T = Id + V g(V^T V) V^T where g(s) = ((1+s)^{-1/2} - 1)/s, so the cost is
/// O(M d q) instead of O(M^3).
Matrix apply_etkf(const Matrix& deviations, const Matrix& h, const SymmetricMatrix& r);

/// R(P) = (R + H P H^T)^{-1/2} ((R + H P H^T)^{1/2} + R^{1/2})^{-1}.
Matrix whitaker_weight(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

/// Modified gain K~ = P H^T R(P).
Matrix whitaker_gain(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

/// Id - K~ H.
Matrix transform_whitaker(const SymmetricMatrix& p, const Matrix& h, const SymmetricMatrix& r);

}  // namespace esrf
