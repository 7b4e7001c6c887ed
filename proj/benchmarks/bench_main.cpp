#include "esrf/analysis.hpp"
#include "esrf/coupling.hpp"
#include "esrf/rng.hpp"
#include "esrf/transforms.hpp"

#include <benchmark/benchmark.h>

using namespace esrf;

namespace {

Ensemble make_ensemble(Eigen::Index d, Eigen::Index m) {
    return Ensemble(StreamFactory(1).stream(Purpose::Sweep, 0, 0).normals(0, d * m).reshaped(d, m));
}

Matrix make_h(Eigen::Index q, Eigen::Index d) {
    return StreamFactory(2).stream(Purpose::Sweep, 0, 0).normals(0, q * d).reshaped(q, d);
}

void BM_Analysis(benchmark::State& state) {
    const auto variant = static_cast<TransformVariant>(state.range(0));
    const Eigen::Index d = 6;
    const Ensemble fc = make_ensemble(d, 32);
    const Matrix h = make_h(3, d);
    const SymmetricMatrix r = SymmetricMatrix::identity(3);
    const Vector y = Vector::Ones(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(analysis(fc, y, variant, h, r));
    }
    state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_Analysis)->DenseRange(0, 4);

void BM_LowRankTransform(benchmark::State& state) {
    const Eigen::Index m = state.range(0);
    const Ensemble fc = make_ensemble(3, m);
    const Matrix h = make_h(2, 3);
    const SymmetricMatrix r = SymmetricMatrix::identity(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_etkf(fc.deviations(), h, r));
    }
    state.SetComplexityN(m);
}
BENCHMARK(BM_LowRankTransform)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oN);

void BM_DenseTransform(benchmark::State& state) {
    const Ensemble fc = make_ensemble(3, state.range(0));
    const Matrix h = make_h(2, 3);
    const SymmetricMatrix r = SymmetricMatrix::identity(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(transform_etkf(fc.deviations(), h, r));
    }
}
BENCHMARK(BM_DenseTransform)->RangeMultiplier(4)->Range(16, 256);

void BM_NormalDraws(benchmark::State& state) {
    const NoiseStream s = StreamFactory(3).stream(Purpose::ModelNoise, 0, 0);
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::uint64_t step = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(s.normals(step++, n));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NormalDraws)->Arg(1024);

void BM_CoupledStep(benchmark::State& state) {
    const auto model = builtin_model("vec3-linear", Flavor::Discrete);
    const StreamFactory streams(4);
    const CoupledSystem sys = init_coupled(model, state.range(0), streams, 0);
    LawStep law;
    law.forecast = {model.initial_mean(), model.initial_cov()};
    law.analysis = law.forecast;
    law.transform = transform_unified(law.forecast.cov, model.h(), model.r());
    const Vector y = Vector::Zero(model.obs_dim());
    for (auto _ : state) {
        benchmark::DoNotOptimize(step_coupled_discrete(sys, y, TransformVariant::EAKF, model, law, streams));
    }
}
BENCHMARK(BM_CoupledStep)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
