#pragma once

#include "esrf/linalg.hpp"

namespace esrf {

/// Ordered collection of M >= 2 members in R^d, stored as the columns of a
/// d x M matrix, with cached empirical mean, deviations E (columns X_i - mean)
/// and covariance P = E E^T / (M - 1).
class Ensemble {
public:
    explicit Ensemble(Matrix members);

    Eigen::Index dim() const { return members_.rows(); }
    Eigen::Index size() const { return members_.cols(); }

    const Matrix& members() const { return members_; }
    auto member(Eigen::Index i) const { return members_.col(i); }
    const Vector& mean() const { return mean_; }
    const Matrix& deviations() const { return deviations_; }
    const SymmetricMatrix& covariance() const { return covariance_; }

    /// Rebuilds an ensemble from a mean and deviation matrix: X_i = mean + E e_i.
    static Ensemble from_mean_and_deviations(const Vector& mean, const Matrix& deviations);

private:
    Matrix members_;
    Vector mean_;
    Matrix deviations_;
    SymmetricMatrix covariance_;
};

/// Empirical covariance E E^T / (M - 1) of an arbitrary d x M sample.
SymmetricMatrix empirical_covariance(const Matrix& samples);

}  // namespace esrf
