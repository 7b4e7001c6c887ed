#include "esrf/audit.hpp"

#include "esrf/analysis.hpp"
#include "esrf/error.hpp"
#include "esrf/parallel.hpp"
#include "esrf/rng.hpp"
#include "esrf/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>

namespace esrf {
namespace {

constexpr double kConsistencyRtol = 1e-8;
constexpr double kAdjointRtol = 1e-9;
constexpr double kMeanAtol = 1e-12;
constexpr double kBoundSlack = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense M x M transforms are only formed up to this ensemble size.
constexpr Eigen::Index kDenseEtkfLimit = 512;

double relative(double diff, double scale) {
    return scale > 0.0 ? diff / scale : diff;
}

AuditCheck identity(std::string name, double residual, double tol) {
    return {std::move(name), residual, tol, std::isfinite(residual) && residual <= tol};
}

// Bounds report lhs / rhs and pass up to a round-off slack.
AuditCheck bound(std::string name, double lhs, double rhs) {
    double ratio = 0.0;
    if (rhs > 0.0) {
        ratio = lhs / rhs;
    } else if (lhs > 0.0) {
        ratio = kInf;
    }
    return identity(std::move(name), ratio, 1.0 + kBoundSlack);
}

void guarded(std::vector<AuditCheck>& out, const std::string& name,
             const std::function<AuditCheck()>& check) {
    try {
        out.push_back(check());
    } catch (const std::exception&) {
        out.push_back({name, kInf, 0.0, false});
    }
}

double inverse_norm(const SymmetricMatrix& r) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r.entries(), Eigen::EigenvaluesOnly);
    return 1.0 / eig.eigenvalues().minCoeff();
}

}  // namespace

bool AuditReport::pass() const {
    return violations() == 0;
}

int AuditReport::violations() const {
    return static_cast<int>(std::count_if(checks.begin(), checks.end(),
                                          [](const AuditCheck& c) { return !c.pass; }));
}

const AuditCheck* AuditReport::find(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

AuditReport audit_identities(const Ensemble& fc, const Matrix& h, const SymmetricMatrix& r,
                             const std::optional<SymmetricMatrix>& other) {
    AuditReport report;
    auto& out = report.checks;
    const Eigen::Index d = fc.dim();
    const Eigen::Index m = fc.size();
    const SymmetricMatrix& p = fc.covariance();
    const Matrix& e = fc.deviations();
    const Vector y = Vector::Zero(h.rows());

    for (auto variant : all_variants()) {
        const std::string tag(to_string(variant));
        guarded(out, "consistency/" + tag, [&] {
            const Matrix expected = (Matrix::Identity(d, d) - kalman_gain(p, h, r) * h) * p.entries();
            const Ensemble analyzed = analysis(fc, y, variant, h, r);
            const double diff = (analyzed.covariance().entries() - expected).norm();
            return identity("consistency/" + tag, relative(diff, expected.norm()), kConsistencyRtol);
        });
        guarded(out, "mean-preservation/" + tag, [&] {
            const Matrix ea = analyzed_deviations(fc, variant, h, r);
            const double sum = ea.rowwise().sum().norm() / static_cast<double>(m);
            return identity("mean-preservation/" + tag, relative(sum, ea.norm()), kAdjointRtol);
        });
    }

    guarded(out, "adjointness", [&] {
        const Matrix left = transform_eakf(p, h, r) * e;
        const Matrix right =
            m <= kDenseEtkfLimit ? Matrix(e * transform_etkf(e, h, r).entries()) : apply_etkf(e, h, r);
        return identity("adjointness", relative((left - right).norm(), e.norm()), kAdjointRtol);
    });
    guarded(out, "unified-adjointness", [&] {
        const Matrix left = transform_unified(p, h, r) * e;
        return identity("unified-adjointness", relative((left - apply_etkf(e, h, r)).norm(), e.norm()),
                        kAdjointRtol);
    });

    // An invalid R makes every bound check below fail instead of throwing.
    std::optional<SymmetricMatrix> theta_or;
    try {
        theta_or = observation_precision(h, r);
    } catch (const Error&) {
    }
    auto need_theta = [&]() -> const SymmetricMatrix& {
        if (!theta_or) {
            throw SolveFailure("observation covariance R is not positive definite");
        }
        return *theta_or;
    };
    const double norm_p = spectral_norm(p);
    const double norm_h = spectral_norm(h);
    const double norm_rinv = theta_or ? inverse_norm(r) : kInf;
    guarded(out, "transform-bound", [&] {
        return bound("transform-bound", spectral_norm(transform_unified(p, h, r)),
                     1.0 + 0.5 * spectral_norm(need_theta()) * norm_p);
    });
    guarded(out, "gain-factor-bound", [&] {
        need_theta();
        const Matrix factor = Matrix::Identity(d, d) - kalman_gain(p, h, r) * h;
        return bound("gain-factor-bound", spectral_norm(factor),
                     1.0 + norm_p * norm_h * norm_h * norm_rinv);
    });
    guarded(out, "gain-lipschitz", [&] {
        need_theta();
        std::vector<SymmetricMatrix> partners;
        if (other) {
            partners.push_back(*other);
        } else {
            partners.push_back(SymmetricMatrix::psd(0.5 * p.entries()));
            partners.push_back(SymmetricMatrix::zero(d));
        }
        const Matrix gain = kalman_gain(p, h, r);
        double worst = 0.0;
        for (const auto& q : partners) {
            const double lhs = spectral_norm(gain - kalman_gain(q, h, r));
            const double rhs = (1.0 + norm_p * norm_h * norm_h * norm_rinv) * norm_h * norm_rinv *
                               spectral_norm(p.entries() - q.entries());
            worst = std::max(worst, bound("", lhs, rhs).residual);
        }
        return identity("gain-lipschitz", worst, 1.0 + kBoundSlack);
    });
    guarded(out, "whitaker-bound", [&] {
        need_theta();
        return bound("whitaker-bound", spectral_norm(whitaker_weight(p, h, r)), 0.5 * norm_rinv);
    });
    guarded(out, "etkf-mean", [&] {
        const Vector ones = Vector::Ones(m);
        Vector image;
        if (m <= kDenseEtkfLimit) {
            image = transform_etkf(e, h, r).entries() * ones;
        } else {
            // T 1 = 1 + Z^T g(Z Z^T) Z 1 with Z = L^{-1} H Et, R = L L^T.
            const Eigen::LLT<Matrix> llt(r.entries());
            if (llt.info() != Eigen::Success) {
                throw SolveFailure("R is not positive definite");
            }
            const Matrix z = llt.matrixL().solve(h * e) / std::sqrt(static_cast<double>(m - 1));
            Eigen::SelfAdjointEigenSolver<Matrix> eig(z * z.transpose());
            const Vector g = eig.eigenvalues().unaryExpr([](double s) {
                const double root = std::sqrt(1.0 + std::max(s, 0.0));
                return -1.0 / (root * (1.0 + root));
            });
            image = ones + z.transpose() * (eig.eigenvectors() * g.asDiagonal() *
                                            eig.eigenvectors().transpose() * (z * ones));
        }
        return identity("etkf-mean", (image - ones).lpNorm<Eigen::Infinity>(), kMeanAtol);
    });
    return report;
}

int SweepSummary::violations() const {
    int total = 0;
    for (const auto& c : checks) {
        total += c.violations;
    }
    return total;
}

SweepInstance sweep_instance(const SweepOptions& options, int index) {
    if (options.max_dim < 1 || options.max_members < 2) {
        throw ConfigError("sweep needs max_dim >= 1 and max_members >= 2");
    }
    const StreamFactory factory(options.seed);
    const NoiseStream s = factory.stream(Purpose::Sweep, static_cast<std::uint64_t>(index), 0);
    auto pick = [&](std::uint64_t slot, int lo, int hi) {
        return lo + std::min(hi - lo, static_cast<int>(s.uniform(0, slot) * (hi - lo + 1)));
    };
    const int d = pick(0, 1, options.max_dim);
    const int q = pick(1, 1, d);
    const int m = pick(2, 2, options.max_members);

    Matrix h = s.normals(1, q * d).reshaped(q, d);
    if (s.uniform(0, 3) < 0.05) {
        h.setZero();
    }
    const Matrix g = s.normals(2, q * q).reshaped(q, q);
    const SymmetricMatrix r(g * g.transpose() + 0.1 * Matrix::Identity(q, q));

    const Matrix mix = s.normals(4, d * d).reshaped(d, d);
    const Matrix spread = mix * s.normals(3, d * m).reshaped(d, m);
    const Vector mean = 3.0 * s.normals(5, d);
    Matrix dev = spread.colwise() - spread.rowwise().mean();
    const double current = spectral_norm(dev * dev.transpose() / static_cast<double>(m - 1));
    const double log_max = std::log10(std::max(options.max_norm, 1e-3));
    const double target = std::pow(10.0, -3.0 + s.uniform(0, 4) * (log_max + 3.0));
    if (current > 0.0) {
        dev *= std::sqrt(target / current);
    }
    return {Ensemble(dev.colwise() + mean), std::move(h), r};
}

SweepSummary audit_sweep(const SweepOptions& options, int workers) {
    std::vector<AuditReport> reports(static_cast<std::size_t>(std::max(options.instances, 0)));
    parallel_for(reports.size(), workers, [&](std::size_t i) {
        const SweepInstance inst = sweep_instance(options, static_cast<int>(i));
        reports[i] = audit_identities(inst.forecast, inst.h, inst.r);
    });

    SweepSummary summary;
    summary.instances = static_cast<int>(reports.size());
    std::map<std::string, std::size_t> slot;
    for (const auto& rep : reports) {
        for (const auto& c : rep.checks) {
            auto [it, inserted] = slot.try_emplace(c.name, summary.checks.size());
            if (inserted) {
                summary.checks.push_back({c.name, 0, 0, 0.0, c.tolerance});
            }
            auto& agg = summary.checks[it->second];
            ++agg.evaluated;
            agg.violations += c.pass ? 0 : 1;
            agg.worst_residual = std::max(agg.worst_residual, c.residual);
            agg.tolerance = std::max(agg.tolerance, c.tolerance);
        }
    }
    return summary;
}

}  // namespace esrf
