#include "esrf/ensemble.hpp"

#include "esrf/error.hpp"

#include <string>

namespace esrf {

Ensemble::Ensemble(Matrix members) : members_(std::move(members)) {
    if (members_.cols() < 2) {
        throw DimensionMismatch("an ensemble needs at least two members, got " +
                                std::to_string(members_.cols()));
    }
    if (members_.rows() < 1) {
        throw DimensionMismatch("ensemble members must have positive dimension");
    }
    const auto m = static_cast<double>(members_.cols());
    mean_ = members_.rowwise().sum() / m;
    deviations_ = members_.colwise() - mean_;
    covariance_ = SymmetricMatrix::psd(deviations_ * deviations_.transpose() / (m - 1.0));
}

Ensemble Ensemble::from_mean_and_deviations(const Vector& mean, const Matrix& deviations) {
    return Ensemble(deviations.colwise() + mean);
}

SymmetricMatrix empirical_covariance(const Matrix& samples) {
    if (samples.cols() < 2) {
        throw DimensionMismatch("empirical covariance needs at least two samples");
    }
    const Vector mean = samples.rowwise().sum() / static_cast<double>(samples.cols());
    const Matrix dev = samples.colwise() - mean;
    return SymmetricMatrix::psd(dev * dev.transpose() / static_cast<double>(samples.cols() - 1));
}

}  // namespace esrf
