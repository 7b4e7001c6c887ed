#pragma once

#include "esrf/analysis.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace esrf {

enum class ExperimentKind {
    ConvergenceDiscrete,
    ConvergenceContinuous,
    Consistency,
    SpdeAudit,
    TransformsAudit,
};

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view text);

/// Flat key=value experiment description. Blank lines and lines starting
/// with '#' are ignored; lists are comma separated.
///
///   kind          convergence-discrete | convergence-continuous | consistency |
///                 spde-audit | transforms-audit                      (required)
///   model         builtin model name                   [scalar-linear]
///   variant       transform variant(s)                 [default_variant(d, M)]
///   M             ensemble sizes                       [8,16,...,1024]
///   steps         discrete steps K                     [10]
///   eval_step     step at which D is evaluated         [steps]
///   T, dt         continuous horizon and step          [1, 1e-3]
///   replications                                       [64 discrete, 16 continuous]
///   p             moment orders, each in {1,2,4}       [2]
///   seed                                               [1]
///   out           output directory                     [out]
///   m_ref         reference ensemble size (nonlinear)  [32768]
///   m_ref_check   rerun the largest M with 2*m_ref     [true]
///   n_stop        stopping level                       [10 tr(P0) + 10 T tr(Q)]
///   bootstrap     bootstrap resamples                  [1000; 200 for consistency]
///   band          accepted slope interval "lo,hi"      [-0.7,-0.3 discrete; -0.75,-0.25 continuous]
///   synthetic_c   replace measured D by c M^(-1/2)     [unset]
///   sweeps, dim, members_max   audit sweep sizes       [200, 6, 20]
///   record_every  continuous CSV thinning              [1]
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ConvergenceDiscrete;
    std::string model = "scalar-linear";
    std::vector<TransformVariant> variants;
    std::vector<Eigen::Index> members{8, 16, 32, 64, 128, 256, 512, 1024};
    int steps = 10;
    std::optional<int> eval_step;
    double horizon = 1.0;
    double dt = 1e-3;
    int replications = 64;
    std::vector<int> p_orders{2};
    std::uint64_t seed = 1;
    std::filesystem::path out = "out";
    Eigen::Index m_ref = 32768;
    bool m_ref_check = true;
    std::optional<double> n_stop;
    int bootstrap = 1000;
    double band_low = -0.7;
    double band_high = -0.3;
    std::optional<double> synthetic_c;
    int sweeps = 200;
    int max_dim = 6;
    int members_max = 20;
    int record_every = 1;
};

/// Throws ConfigError on unknown or repeated keys, malformed values or
/// violated invariants (M >= 2, replications >= 1, dt > 0, ...).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace esrf
