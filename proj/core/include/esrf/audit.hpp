#pragma once

#include "esrf/ensemble.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace esrf {

/// One audited identity or bound. `residual` is compared against `tolerance`
/// (relative residuals for identities, bound excess ratios for bounds).
struct AuditCheck {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct AuditReport {
    std::vector<AuditCheck> checks;

    bool pass() const;
    /// Number of failed checks.
    int violations() const;
    /// nullptr when no check of that name exists.
    const AuditCheck* find(const std::string& name) const;
};

/// Runs every structural check on one forecast ensemble:
///   consistency/<variant>  P^a = (Id - K H) P^f, rtol 1e-8
///   adjointness            ||A E - E T||_F <= 1e-9 ||E||_F
///   unified-adjointness    same with T(P) in place of A
///   transform-bound        ||T(P)|| <= 1 + ||Theta|| ||P|| / 2
///   gain-factor-bound      ||Id - K(P) H|| <= 1 + ||P|| ||H||^2 ||R^-1||
///   gain-lipschitz         ||K(P) - K(P')|| <= (1 + ||P|| ||H||^2 ||R^-1||) ||H|| ||R^-1|| ||P - P'||
///   whitaker-bound         ||R(P)|| <= ||R^-1|| / 2
///   etkf-mean              ||T 1 - 1||_inf <= 1e-12
///   mean-preservation/<v>  analyzed deviations sum to zero
/// The gain Lipschitz check uses `other` when given and otherwise the pairs
/// (P, P/2) and (P, 0). Never throws; a numerical failure inside a check
/// is reported as a failed check with an infinite residual.
AuditReport audit_identities(const Ensemble& forecast, const Matrix& h, const SymmetricMatrix& r,
                             const std::optional<SymmetricMatrix>& other = std::nullopt);

struct SweepOptions {
    int instances = 200;
    int max_dim = 6;
    int max_members = 20;
    double max_norm = 1e3;  // ||P|| is drawn log-uniformly up to this value
    std::uint64_t seed = 0x5eedULL;
};

struct CheckSummary {
    std::string name;
    int evaluated = 0;
    int violations = 0;
    double worst_residual = 0.0;
    double tolerance = 0.0;
};

struct SweepSummary {
    int instances = 0;
    std::vector<CheckSummary> checks;

    int violations() const;
};

/// One random (P, H, R, E) instance of the sweep, addressed by index.
struct SweepInstance {
    Ensemble forecast;
    Matrix h;
    SymmetricMatrix r;
};
SweepInstance sweep_instance(const SweepOptions& options, int index);

/// audit_identities over options.instances random instances.
SweepSummary audit_sweep(const SweepOptions& options, int workers = 1);

}  // namespace esrf
