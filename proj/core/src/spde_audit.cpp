#include "esrf/spde_audit.hpp"

#include "esrf/error.hpp"
#include "esrf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <string>
#include <vector>

namespace esrf {
namespace {

// a^T x + b
struct Affine {
    Vector a;
    double b = 0.0;
};

Affine coordinate_form(Eigen::Index d, int k) {
    return {Vector::Unit(d, k), 0.0};
}

Affine constant_form(Eigen::Index d, double c) {
    return {Vector::Zero(d), c};
}

// E[z_0 ... z_{n-1}] for centered jointly Gaussian z with covariance cov.
double centered_moment(const Matrix& cov, std::vector<int> idx) {
    if (idx.empty()) {
        return 1.0;
    }
    if (idx.size() % 2 == 1) {
        return 0.0;
    }
    const int first = idx.front();
    double total = 0.0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
        std::vector<int> rest;
        for (std::size_t i = 1; i < idx.size(); ++i) {
            if (i != j) {
                rest.push_back(idx[i]);
            }
        }
        total += cov(first, idx[j]) * centered_moment(cov, rest);
    }
    return total;
}

// E[prod_i (a_i^T x + b_i)] for x ~ N(m, P), expanding each factor into its
// mean and centered part.
double gaussian_product(const GaussianBelief& g, const std::vector<Affine>& factors) {
    const auto n = static_cast<int>(factors.size());
    Vector mu(n);
    Matrix loads(g.mean.size(), n);
    for (int i = 0; i < n; ++i) {
        mu(i) = factors[static_cast<std::size_t>(i)].a.dot(g.mean) + factors[static_cast<std::size_t>(i)].b;
        loads.col(i) = factors[static_cast<std::size_t>(i)].a;
    }
    const Matrix cov = loads.transpose() * g.cov.entries() * loads;
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> centered;
        double coeff = 1.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                centered.push_back(i);
            } else {
                coeff *= mu(i);
            }
        }
        if (coeff != 0.0) {
            total += coeff * centered_moment(cov, centered);
        }
    }
    return total;
}

struct Polynomial {
    std::vector<Affine> factors;   // phi = prod factors
    std::vector<Affine> gradient;  // component j of grad phi
    Matrix hessian;
};

Polynomial expand(TestFunction phi, Eigen::Index d) {
    if (phi.k < 0 || phi.k >= d || phi.l < 0 || phi.l >= d) {
        throw UnsupportedTestFunction("test function index outside the state dimension");
    }
    Polynomial out;
    out.hessian = Matrix::Zero(d, d);
    out.gradient.assign(static_cast<std::size_t>(d), constant_form(d, 0.0));
    if (phi.kind == TestFunction::Kind::Coordinate) {
        out.factors = {coordinate_form(d, phi.k)};
        out.gradient[static_cast<std::size_t>(phi.k)] = constant_form(d, 1.0);
        return out;
    }
    out.factors = {coordinate_form(d, phi.k), coordinate_form(d, phi.l)};
    // d/dx_j (x_k x_l) = delta_jk x_l + delta_jl x_k
    auto& gk = out.gradient[static_cast<std::size_t>(phi.k)];
    gk.a += Vector::Unit(d, phi.l);
    auto& gl = out.gradient[static_cast<std::size_t>(phi.l)];
    gl.a += Vector::Unit(d, phi.k);
    out.hessian(phi.k, phi.l) += 1.0;
    out.hessian(phi.l, phi.k) += 1.0;
    return out;
}

Affine centered_row(const Matrix& rows, Eigen::Index j, const Vector& mean) {
    // (rows (x - m))_j
    return {rows.row(j).transpose(), -rows.row(j).dot(mean)};
}

}  // namespace

TestFunction parse_test_function(std::string_view text) {
    static const std::regex coord(R"(\s*coordinate\(\s*(\d+)\s*\)\s*)");
    static const std::regex quad(R"(\s*quadratic\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
    const std::string s(text);
    std::smatch m;
    if (std::regex_match(s, m, coord)) {
        return TestFunction::coordinate(std::stoi(m[1]));
    }
    if (std::regex_match(s, m, quad)) {
        return TestFunction::quadratic(std::stoi(m[1]), std::stoi(m[2]));
    }
    throw UnsupportedTestFunction("unsupported test function '" + s + "'");
}

SpdeTerms spde_term_audit(const GaussianBelief& belief, const Matrix& h, const SymmetricMatrix& r,
                          TestFunction phi) {
    const Eigen::Index d = belief.mean.size();
    if (h.cols() != d || h.rows() != r.dim() || belief.cov.dim() != d) {
        throw DimensionMismatch("belief, H and R shapes disagree");
    }
    const Polynomial poly = expand(phi, d);
    const Eigen::LLT<Matrix> llt(r.entries());
    if (llt.info() != Eigen::Success) {
        throw SolveFailure("R is not positive definite");
    }
    const Matrix& p = belief.cov.entries();
    // P H^T R^-1 and P Theta = P H^T R^-1 H.
    const Matrix gain = llt.solve(h * p).transpose();
    const Matrix p_theta = gain * h;

    SpdeTerms out;
    out.term_II = 0.5 * (p_theta * p * poly.hessian).trace();

    Vector mean_grad(d);
    double iv = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const Affine& g = poly.gradient[static_cast<std::size_t>(j)];
        mean_grad(j) = gaussian_product(belief, {g});
        iv += gaussian_product(belief, {g, centered_row(p_theta, j, belief.mean)});
    }
    out.term_IV = -0.5 * iv;
    out.innovation_III = gain.transpose() * mean_grad;

    // E[phi (x - m)_j] for each j, then times H^T R^-1.
    Vector cross(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<Affine> f = poly.factors;
        f.push_back(centered_row(Matrix::Identity(d, d), j, belief.mean));
        cross(j) = gaussian_product(belief, f);
    }
    out.innovation_KS = llt.solve(h * cross);
    return out;
}

SpdeTerms spde_term_audit(const GaussianBelief& belief, const StateSpaceModel& model,
                          TestFunction phi) {
    SpdeTerms out = spde_term_audit(belief, model.h(), model.r(), phi);
    if (model.is_linear()) {
        const Eigen::Index d = belief.mean.size();
        const Polynomial poly = expand(phi, d);
        const Matrix& b = model.linear_drift();
        double drift = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            drift += gaussian_product(belief, {{b.row(j).transpose(), 0.0},
                                               poly.gradient[static_cast<std::size_t>(j)]});
        }
        out.term_I = 0.5 * (model.q().entries() * poly.hessian).trace() + drift;
    }
    return out;
}

SpdeSweepSummary spde_audit_sweep(int beliefs, int max_dim, std::uint64_t seed, double tol) {
    SpdeSweepSummary summary;
    const StreamFactory factory(seed);
    for (int i = 0; i < beliefs; ++i) {
        const NoiseStream s = factory.stream(Purpose::Sweep, static_cast<std::uint64_t>(i), 1);
        const int d = 1 + std::min(max_dim - 1, static_cast<int>(s.uniform(0, 0) * max_dim));
        const int q = 1 + std::min(d - 1, static_cast<int>(s.uniform(0, 1) * d));
        const Matrix l = s.normals(1, d * d).reshaped(d, d);
        const GaussianBelief belief{s.normals(2, d),
                                    SymmetricMatrix::psd(l * l.transpose() + 0.1 * Matrix::Identity(d, d))};
        const Matrix h = s.normals(3, q * d).reshaped(q, d);
        const Matrix g = s.normals(4, q * q).reshaped(q, q);
        const SymmetricMatrix r(g * g.transpose() + Matrix::Identity(q, q));
        ++summary.beliefs;
        for (int k = 0; k < d; ++k) {
            for (int m = k; m < d; ++m) {
                const SpdeTerms t = spde_term_audit(belief, h, r, TestFunction::quadratic(k, m));
                const double cancel = std::abs(t.term_II + t.term_IV);
                const double innov = (t.innovation_III - t.innovation_KS).lpNorm<Eigen::Infinity>();
                summary.worst_cancellation = std::max(summary.worst_cancellation, cancel);
                summary.worst_innovation = std::max(summary.worst_innovation, innov);
                if (!(cancel <= tol) || !(innov <= tol)) {
                    ++summary.violations;
                }
                ++summary.functions;
            }
        }
    }
    return summary;
}

}  // namespace esrf
