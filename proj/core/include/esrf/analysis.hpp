#pragma once

#include "esrf/ensemble.hpp"
#include "esrf/model.hpp"
#include "esrf/rng.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace esrf {

/// Which square-root analysis to run.
///   EAKF        A E with A = sqrt(P)(Id + sqrt(P) Theta sqrt(P))^{-1/2} sqrt(P)^+
///   ETKF_direct E T with the M x M ensemble-space transform T
///   ETKF_via_T  the ETKF evaluated through the adjoint identity E T = T(P) E
///   Whitaker    (Id - K~ H) E
///   UnifiedT    T(P) E
enum class TransformVariant { EAKF, ETKF_direct, ETKF_via_T, Whitaker, UnifiedT };

std::string_view to_string(TransformVariant variant);
/// Accepts the enum spelling, plus "ETKF" as an alias for ETKF_direct.
std::optional<TransformVariant> parse_variant(std::string_view text);
std::vector<TransformVariant> all_variants();

/// ETKF_direct when M < d (cheap M x M algebra), EAKF otherwise.
TransformVariant default_variant(Eigen::Index dim, Eigen::Index members);

/// Forecast with explicit standard-normal draws (d x M): X_i <- B(X_i) + C w_i.
Ensemble forecast(const Ensemble& ens, const StateSpaceModel& model, const Matrix& draws);

/// Forecast drawing w_i from the ModelNoise stream of member i at `step`.
Ensemble forecast(const Ensemble& ens, const StateSpaceModel& model, const StreamFactory& streams,
                  std::uint64_t replication, std::uint64_t step);

/// Deviation matrix after the analysis, E^a.
Matrix analyzed_deviations(const Ensemble& forecast, TransformVariant variant, const Matrix& h,
                           const SymmetricMatrix& r);

/// Square-root analysis: mean x^a = x^f + K(P^f)(y - H x^f), deviations from
/// analyzed_deviations(), members x^a + E^a e_i.
Ensemble analysis(const Ensemble& forecast, const Vector& y, TransformVariant variant,
                  const Matrix& h, const SymmetricMatrix& r);

}  // namespace esrf
