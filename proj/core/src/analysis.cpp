#include "esrf/analysis.hpp"

#include "esrf/error.hpp"
#include "esrf/transforms.hpp"

namespace esrf {

std::string_view to_string(TransformVariant variant) {
    switch (variant) {
        case TransformVariant::EAKF:
            return "EAKF";
        case TransformVariant::ETKF_direct:
            return "ETKF_direct";
        case TransformVariant::ETKF_via_T:
            return "ETKF_via_T";
        case TransformVariant::Whitaker:
            return "Whitaker";
        case TransformVariant::UnifiedT:
            return "UnifiedT";
    }
    return "?";
}

std::optional<TransformVariant> parse_variant(std::string_view text) {
    for (auto v : all_variants()) {
        if (text == to_string(v)) {
            return v;
        }
    }
    if (text == "ETKF") {
        return TransformVariant::ETKF_direct;
    }
    return std::nullopt;
}

std::vector<TransformVariant> all_variants() {
    return {TransformVariant::EAKF, TransformVariant::ETKF_direct, TransformVariant::ETKF_via_T,
            TransformVariant::Whitaker, TransformVariant::UnifiedT};
}

TransformVariant default_variant(Eigen::Index dim, Eigen::Index members) {
    return members < dim ? TransformVariant::ETKF_direct : TransformVariant::EAKF;
}

Ensemble forecast(const Ensemble& ens, const StateSpaceModel& model, const Matrix& draws) {
    if (draws.rows() != ens.dim() || draws.cols() != ens.size()) {
        throw DimensionMismatch("forecast draws must be d x M");
    }
    return Ensemble(model.drift_columns(ens.members()) + model.c() * draws);
}

Ensemble forecast(const Ensemble& ens, const StateSpaceModel& model, const StreamFactory& streams,
                  std::uint64_t replication, std::uint64_t step) {
    return forecast(ens, model,
                    streams.member_draws(Purpose::ModelNoise, replication, ens.size(), ens.dim(), step));
}

Matrix analyzed_deviations(const Ensemble& fc, TransformVariant variant, const Matrix& h,
                           const SymmetricMatrix& r) {
    const Matrix& e = fc.deviations();
    const SymmetricMatrix& p = fc.covariance();
    switch (variant) {
        case TransformVariant::EAKF:
            return transform_eakf(p, h, r) * e;
        case TransformVariant::ETKF_direct:
            return apply_etkf(e, h, r);
        case TransformVariant::ETKF_via_T:
        case TransformVariant::UnifiedT:
            return transform_unified(p, h, r) * e;
        case TransformVariant::Whitaker:
            return transform_whitaker(p, h, r) * e;
    }
    throw Error("unhandled transform variant");
}

Ensemble analysis(const Ensemble& fc, const Vector& y, TransformVariant variant, const Matrix& h,
                  const SymmetricMatrix& r) {
    if (y.size() != h.rows()) {
        throw DimensionMismatch("observation has wrong dimension");
    }
    const Matrix gain = kalman_gain(fc.covariance(), h, r);
    const Vector mean = fc.mean() + gain * (y - h * fc.mean());
    return Ensemble::from_mean_and_deviations(mean, analyzed_deviations(fc, variant, h, r));
}

}  // namespace esrf
