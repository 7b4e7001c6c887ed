#pragma once

#include "esrf/linalg.hpp"
#include "esrf/model.hpp"
#include "esrf/rng.hpp"

#include <cstdint>

namespace esrf::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t id,
                            std::uint64_t seed = 99) {
    return StreamFactory(seed).stream(Purpose::Sweep, id, 77).normals(0, rows * cols).reshaped(rows, cols);
}

inline SymmetricMatrix random_psd(Eigen::Index d, std::uint64_t id, Eigen::Index rank = -1) {
    const Eigen::Index k = rank < 0 ? d : rank;
    const Matrix a = random_matrix(d, k, id);
    return SymmetricMatrix::psd(a * a.transpose());
}

// PSD matrix with eigenvalues drawn uniformly from [lo, hi].
inline SymmetricMatrix random_spectrum(Eigen::Index d, std::uint64_t id, double lo, double hi) {
    const Matrix a = random_matrix(d, d, id);
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    const NoiseStream s = StreamFactory(7).stream(Purpose::Sweep, id, 78);
    Vector lambda(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        lambda(i) = lo + (hi - lo) * s.uniform(0, static_cast<std::uint64_t>(i));
    }
    return SymmetricMatrix::psd(q * lambda.asDiagonal() * q.transpose());
}

inline StateSpaceModel scalar_model(double b, double c, double h, double gamma, Flavor flavor,
                                    double m0 = 0.0, double p0 = 1.0) {
    ModelSpec spec;
    spec.name = "test-scalar";
    spec.flavor = flavor;
    spec.drift = LinearDrift{Matrix::Constant(1, 1, b)};
    spec.c = Matrix::Constant(1, 1, c);
    spec.h = Matrix::Constant(1, 1, h);
    spec.gamma = Matrix::Constant(1, 1, gamma);
    spec.initial_mean = Vector::Constant(1, m0);
    spec.initial_cov = Matrix::Constant(1, 1, p0);
    return StateSpaceModel(spec);
}

}  // namespace esrf::testing
