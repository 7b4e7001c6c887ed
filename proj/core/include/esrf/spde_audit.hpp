#pragma once

#include "esrf/kalman.hpp"
#include "esrf/model.hpp"

#include <cstdint>
#include <optional>
#include <string_view>

namespace esrf {

/// Polynomial test functions for which the Gaussian expectations are exact.
struct TestFunction {
    enum class Kind { Coordinate, Quadratic };
    Kind kind = Kind::Coordinate;
    int k = 0;
    int l = 0;

    static TestFunction coordinate(int k) { return {Kind::Coordinate, k, k}; }
    static TestFunction quadratic(int k, int l) { return {Kind::Quadratic, k, l}; }
};

/// Parses "coordinate(k)" or "quadratic(k,l)" (0-based); anything else
/// throws UnsupportedTestFunction.
TestFunction parse_test_function(std::string_view text);

/// Terms of the mean-field evolution of int phi dpibar for pibar = N(m, P):
///   (I)   int L phi dpibar, L f = tr(Q f'')/2 + B . grad f   (linear B only)
///   (II)  tr(P Theta P phi'') / 2
///   (III) E[grad phi]^T P H^T R^-1 (dY - H m dt), reported as its coefficient
///   (IV)  -E[grad phi^T P Theta (x - m)] / 2
/// and the Kushner-Stratonovich innovation coefficient E[phi (x - m)^T] H^T R^-1.
struct SpdeTerms {
    std::optional<double> term_I;
    double term_II = 0.0;
    Vector innovation_III;
    double term_IV = 0.0;
    Vector innovation_KS;
};

/// Expectations are evaluated with Isserlis' theorem on products of up to four
/// affine forms. Throws UnsupportedTestFunction for indices outside [0, d).
SpdeTerms spde_term_audit(const GaussianBelief& belief, const Matrix& h, const SymmetricMatrix& r,
                          TestFunction phi);

/// Same with (I) filled in from the model's Q and linear drift.
SpdeTerms spde_term_audit(const GaussianBelief& belief, const StateSpaceModel& model,
                          TestFunction phi);

struct SpdeSweepSummary {
    int beliefs = 0;
    int functions = 0;
    double worst_cancellation = 0.0;  // max |(II) + (IV)|
    double worst_innovation = 0.0;    // max ||c_III - c_KS||_inf
    int violations = 0;
};

/// Random Gaussian beliefs (d <= max_dim) with random H and R; every quadratic
/// test function k <= l is audited against tolerance `tol`.
SpdeSweepSummary spde_audit_sweep(int beliefs, int max_dim, std::uint64_t seed, double tol = 1e-10);

}  // namespace esrf
