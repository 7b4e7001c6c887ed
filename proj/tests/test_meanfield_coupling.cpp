#include "esrf/coupling.hpp"
#include "esrf/error.hpp"
#include "esrf/spde_audit.hpp"
#include "esrf/statistics.hpp"
#include "esrf/transforms.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace esrf;
using esrf::testing::random_matrix;
using esrf::testing::random_psd;
using esrf::testing::scalar_model;

namespace {

Simulation truth(const StateSpaceModel& model, int steps, double horizon = 1.0, double dt = 1e-3) {
    const StreamFactory f(2024);
    const auto ws = f.stream(Purpose::TruthState, 0, 0);
    const auto vs = f.stream(Purpose::TruthObservation, 0, 0);
    if (model.flavor() == Flavor::Discrete) {
        return simulate_discrete(model, model.initial_mean(), steps, ws, vs);
    }
    return simulate_continuous(model, model.initial_mean(), horizon, dt, ws, vs);
}

ErrorSeries trace_series(std::initializer_list<double> traces) {
    ErrorSeries s;
    for (double t : traces) {
        ErrorRecord r;
        r.trP = t;
        r.trPbarM = 0.0;
        s.records.push_back(r);
    }
    return s;
}

double sup_delta2(const ErrorSeries& s) {
    double sup = 0.0;
    for (const auto& r : s.records) {
        sup = std::max(sup, r.delta2);
    }
    return sup;
}

}  // namespace

TEST_CASE("coupled systems start together") {
    const auto model = builtin_model("vec3-linear", Flavor::Discrete);
    const CoupledSystem sys = init_coupled(model, 8, StreamFactory(1), 0);
    CHECK((sys.ensemble.members() - sys.mf_members).norm() == 0.0);
    const ErrorRecord rec = error_stats(sys, {model.initial_mean(), model.initial_cov()}, 0.0);
    CHECK(rec.delta1 == 0.0);
    CHECK(rec.delta2 == 0.0);
    CHECK(rec.delta4 == 0.0);
}

TEST_CASE("exact law is the Kalman filter") {
    const auto model = builtin_model("vec3-linear", Flavor::Discrete);
    const Simulation sim = truth(model, 6);
    const KalmanPath kf = kalman_filter(model, sim.observations);
    const DiscreteLaw law = exact_discrete_law(model, sim.observations);
    REQUIRE(law.steps.size() == kf.analysis.size());
    CHECK(law.exact);
    for (std::size_t k = 0; k < kf.analysis.size(); ++k) {
        CHECK(law.steps[k].analysis.mean == kf.analysis[k].mean);
        CHECK(law.steps[k].analysis.cov.entries() == kf.analysis[k].cov.entries());
        CHECK(law.steps[k].forecast.cov.entries() == kf.forecast[k].cov.entries());
    }

    const auto cmodel = builtin_model("scalar-linear", Flavor::Continuous);
    const Simulation csim = truth(cmodel, 0, 0.2, 1e-3);
    const ContinuousLaw claw = exact_continuous_law(cmodel, csim.observations);
    const KalmanBucyPath kb =
        kb_integrate({cmodel.initial_mean(), cmodel.initial_cov()}, cmodel, csim.observations, 1e-3);
    REQUIRE(claw.beliefs.size() == kb.beliefs.size());
    CHECK(claw.beliefs.back().mean == kb.beliefs.back().mean);
    CHECK(claw.beliefs.back().cov.entries() == kb.beliefs.back().cov.entries());
}

TEST_CASE("surrogate coupling with matched moments keeps zero residuals") {
    const auto model = builtin_model("vec3-linear", Flavor::Discrete);
    const StreamFactory streams(3);
    const CoupledSystem sys = init_coupled(model, 12, streams, 0);
    const Ensemble fc = forecast(sys.ensemble, model, streams, 0, 1);
    LawStep law;
    law.forecast = {fc.mean(), fc.covariance()};
    const Vector y = Vector::Constant(model.obs_dim(), 0.7);
    law.analysis = kf_update(law.forecast, y, model.h(), model.r());
    law.transform = transform_unified(law.forecast.cov, model.h(), model.r());
    const CoupledSystem next =
        step_coupled_discrete(sys, y, TransformVariant::UnifiedT, model, law, streams);
    CHECK((next.ensemble.members() - next.mf_members).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(next.step == 1);
}

TEST_CASE("larger ensembles couple more tightly in discrete time") {
    const auto model = builtin_model("scalar-linear", Flavor::Discrete);
    const Simulation sim = truth(model, 5);
    const DiscreteLaw law = exact_discrete_law(model, sim.observations);
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const StreamFactory streams(seed + 1);
        const auto small = run_coupled_discrete(model, sim.observations, law, TransformVariant::EAKF, 16,
                                                streams, 0);
        const auto large = run_coupled_discrete(model, sim.observations, law, TransformVariant::EAKF,
                                                1024, streams, 0);
        wins += large.records[5].delta2 < small.records[5].delta2 ? 1 : 0;
    }
    CHECK(wins >= 95);
}

TEST_CASE("no observation information leaves the systems identical") {
    ModelSpec spec;
    spec.name = "blind";
    spec.flavor = Flavor::Continuous;
    spec.drift = LinearDrift{Matrix::Constant(1, 1, -0.5)};
    spec.c = Matrix::Ones(1, 1);
    spec.h = Matrix::Zero(1, 1);
    spec.gamma = Matrix::Ones(1, 1);
    spec.initial_mean = Vector::Zero(1);
    spec.initial_cov = Matrix::Ones(1, 1);
    const StateSpaceModel model(spec);
    const Simulation sim = truth(model, 0, 0.5, 1e-3);
    const ContinuousLaw law = exact_continuous_law(model, sim.observations);
    const ErrorSeries s = run_coupled_continuous(model, sim.observations, law, 32, StreamFactory(4), 0);
    CHECK(sup_delta2(s) < 1e-13);
}

TEST_CASE("one continuous step with matched covariance obeys the residual expansion") {
    const auto model = builtin_model("vec3-linear", Flavor::Continuous);
    const StreamFactory streams(5);
    const double dt = 1e-3;
    CoupledSystem sys = init_coupled(model, 20, streams, 0);
    const Matrix r0 = 0.05 * random_matrix(3, 20, 6);
    sys.mf_members = sys.ensemble.members() - r0;
    const GaussianBelief law{Vector::Constant(3, 0.2), sys.ensemble.covariance()};
    const CoupledSystem next =
        step_coupled_continuous(sys, Vector::Constant(2, 0.01), model, dt, law, streams);
    const Matrix r1 = next.ensemble.members() - next.mf_members;
    const double max_r = r0.colwise().norm().maxCoeff();
    const double gap = (sys.ensemble.mean() - law.mean).norm();
    const double ptheta = spectral_norm(law.cov.entries() * model.theta().entries());
    const double bound = ptheta * (max_r + gap) * dt + model.lipschitz_const() * max_r * dt;
    CHECK((r1 - r0).colwise().norm().maxCoeff() <= bound * (1.0 + 1e-9));
    CHECK_THROWS_AS(step_coupled_continuous(sys, Vector::Zero(2), model, 0.0, law, streams), InvalidStep);
}

TEST_CASE("continuous ordering across seeds") {
    const auto model = builtin_model("scalar-linear", Flavor::Continuous);
    const Simulation sim = truth(model, 0, 1.0, 1e-3);
    const ContinuousLaw law = exact_continuous_law(model, sim.observations);
    int ordered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const StreamFactory streams(seed + 1);
        double last = std::numeric_limits<double>::infinity();
        bool monotone = true;
        for (Eigen::Index m : {16, 64, 256}) {
            const double sup = sup_delta2(run_coupled_continuous(model, sim.observations, law, m, streams, 0));
            monotone = monotone && sup < last;
            last = sup;
        }
        ordered += monotone ? 1 : 0;
    }
    CHECK(ordered >= 90);
}

TEST_CASE("delta and D estimates") {
    CHECK(delta_p(Matrix::Zero(2, 5), 2.0) == 0.0);
    Matrix constant(2, 4);
    constant << 0.6, -0.6, 0.6, 0.0, 0.8, 0.8, -0.8, 1.0;
    for (double p : {1.0, 2.0, 4.0}) {
        CHECK(delta_p(constant, p) == doctest::Approx(1.0).epsilon(1e-15));
    }
    const Matrix r = random_matrix(3, 9, 7);
    CHECK(delta_p(r, 2.0) <= delta_p(r, 4.0));

    const NoiseStream s = StreamFactory(8).stream(Purpose::Bootstrap, 0, 0);
    const Estimate d = d_estimate({1.0, 2.0}, 2.0, 1000, s);
    CHECK(d.value == doctest::Approx(std::sqrt(2.5)));
    CHECK(d.se > 0.0);
    const Estimate zero = d_estimate({0.0, 0.0, 0.0}, 2.0, 100, s);
    CHECK(zero.value == 0.0);
    CHECK(zero.se == 0.0);
    CHECK(power_mean_estimate({1.0, 4.0}, 2.0, 100, s).value == doctest::Approx(std::sqrt(2.5)));
}

TEST_CASE("stopping times") {
    const ErrorSeries flat = trace_series({5.0, 5.0, 5.0});
    CHECK_FALSE(stopping_time(flat, std::numeric_limits<double>::infinity()).combined().has_value());
    CHECK(stopping_time(flat, 5.0).ensemble == std::optional<std::size_t>(0));
    const ErrorSeries rising = trace_series({1.0, 2.0, 4.0, 8.0});
    CHECK(stopping_time(rising, 3.0).ensemble == std::optional<std::size_t>(2));
    CHECK_FALSE(stopping_time(rising, 3.0).mean_field.has_value());

    ErrorSeries marked = rising;
    for (std::size_t i = 0; i < marked.records.size(); ++i) {
        marked.records[i].delta2 = static_cast<double>(i + 1);
    }
    mark_stopped(marked, 3.0);
    CHECK_FALSE(marked.records[1].stopped);
    CHECK(marked.records[2].stopped);
    CHECK(marked.records[3].stopped);
    CHECK(stopped_sup_delta2_sq(marked) == 9.0);

    const auto model = builtin_model("scalar-linear", Flavor::Continuous);
    CHECK(default_stopping_level(model, 2.0) ==
          doctest::Approx(10.0 * trace(model.initial_cov()) + 20.0 * trace(model.q())));
}

TEST_CASE("trace envelope") {
    ModelSpec spec;
    spec.name = "frozen";
    spec.flavor = Flavor::Continuous;
    spec.drift = LinearDrift{Matrix::Zero(1, 1)};
    spec.c = Matrix::Zero(1, 1);
    spec.h = Matrix::Zero(1, 1);
    spec.gamma = Matrix::Ones(1, 1);
    spec.initial_mean = Vector::Zero(1);
    spec.initial_cov = Matrix::Constant(1, 1, 2.0);
    const StateSpaceModel frozen(spec);
    const Simulation fsim = truth(frozen, 0, 0.2, 1e-3);
    const ContinuousLaw flaw = exact_continuous_law(frozen, fsim.observations);
    const TraceEnvelope fenv = trace_envelope_check(
        {run_coupled_continuous(frozen, fsim.observations, flaw, 16, StreamFactory(1), 0, 10)}, frozen, 0.2);
    CHECK(fenv.zero_model_noise);
    CHECK(fenv.trace_constant);
    CHECK(fenv.finite);
    CHECK(std::isnan(fenv.constant));

    const auto model = builtin_model("scalar-linear", Flavor::Continuous);
    auto constant_for = [&](Eigen::Index m, double horizon) {
        const Simulation sim = truth(model, 0, horizon, 1e-3);
        const ContinuousLaw law = exact_continuous_law(model, sim.observations);
        std::vector<ErrorSeries> runs;
        for (std::uint64_t rep = 0; rep < 4; ++rep) {
            runs.push_back(run_coupled_continuous(model, sim.observations, law, m, StreamFactory(9), rep, 20));
        }
        const TraceEnvelope env = trace_envelope_check(runs, model, horizon);
        CHECK(env.finite);
        return env.constant;
    };
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index m : {16, 64, 256}) {
        const double c = constant_for(m, 1.0);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    CHECK(hi <= 2.0 * lo);
    CHECK(constant_for(64, 2.0) <= constant_for(64, 1.0));
}

TEST_CASE("coupling bounds hold along runs") {
    for (const char* name : {"scalar-linear", "vec3-linear"}) {
        const auto model = builtin_model(name, Flavor::Discrete);
        const Simulation sim = truth(model, 10);
        const DiscreteLaw law = exact_discrete_law(model, sim.observations);
        for (auto v : all_variants()) {
            const ErrorSeries s = run_coupled_discrete(model, sim.observations, law, v, 24, StreamFactory(11), 0);
            for (const auto& rec : s.records) {
                const CouplingBounds b = coupling_bounds(rec, 24);
                CHECK(b.mean_triangle);
                CHECK(b.covariance);
                CHECK(b.power_mean);
            }
        }
    }
}

TEST_CASE("surrogate law for nonlinear drift") {
    const auto model = builtin_model("tanh-nonlinear", Flavor::Discrete);
    const Simulation sim = truth(model, 3);
    const DiscreteLaw a = reference_discrete_law(model, sim.observations, StreamFactory(12), 512);
    const DiscreteLaw b = reference_discrete_law(model, sim.observations, StreamFactory(12), 512);
    CHECK_FALSE(a.exact);
    CHECK(a.reference_members == 512);
    CHECK(a.steps.back().analysis.mean == b.steps.back().analysis.mean);
    const DiscreteLaw c = reference_discrete_law(model, sim.observations, StreamFactory(12), 1024);
    CHECK(c.steps.back().analysis.mean != a.steps.back().analysis.mean);
    CHECK_THROWS_AS(exact_discrete_law(model, sim.observations), Error);
}

TEST_CASE("error series CSV") {
    const auto model = builtin_model("scalar-linear", Flavor::Discrete);
    const Simulation sim = truth(model, 2);
    const ErrorSeries s = run_coupled_discrete(model, sim.observations, exact_discrete_law(model, sim.observations),
                                               TransformVariant::EAKF, 8, StreamFactory(13), 0);
    std::ostringstream out;
    write_error_csv(out, s);
    const std::string text = out.str();
    CHECK(text.substr(0, text.find('\n')) ==
          "k_or_t,M,variant,delta2,delta4,mean_gap,cov_gap,trP,trPbarM,stopped_flag");
    CHECK(text.find("\n0,8,EAKF,0,0,") != std::string::npos);
}

TEST_CASE("SPDE terms for coordinate test functions") {
    const GaussianBelief b{Vector::Constant(3, 0.4), random_psd(3, 14)};
    const Matrix h = random_matrix(2, 3, 15);
    const SymmetricMatrix r = SymmetricMatrix::psd(Matrix::Identity(2, 2) * 0.5);
    const Matrix coef = b.cov.entries() * h.transpose() * r.entries().inverse();
    for (int k = 0; k < 3; ++k) {
        const SpdeTerms t = spde_term_audit(b, h, r, TestFunction::coordinate(k));
        CHECK(t.term_II == 0.0);
        CHECK(t.term_IV == 0.0);
        CHECK((t.innovation_III - coef.row(k).transpose()).norm() < 1e-12);
        CHECK((t.innovation_KS - coef.row(k).transpose()).norm() < 1e-12);
    }
}

TEST_CASE("SPDE terms for quadratic test functions cancel") {
    const GaussianBelief b{Vector::LinSpaced(3, -1.0, 2.0), random_psd(3, 16)};
    const Matrix h = random_matrix(2, 3, 17);
    const SymmetricMatrix r = SymmetricMatrix::psd(Matrix::Identity(2, 2) + random_psd(2, 18).entries());
    for (int k = 0; k < 3; ++k) {
        for (int l = k; l < 3; ++l) {
            const SpdeTerms t = spde_term_audit(b, h, r, TestFunction::quadratic(k, l));
            CHECK(std::abs(t.term_II + t.term_IV) < 1e-10);
            CHECK((t.innovation_III - t.innovation_KS).lpNorm<Eigen::Infinity>() < 1e-10);
            CHECK_FALSE(t.term_I.has_value());
        }
    }
    const auto model = builtin_model("vec3-linear", Flavor::Continuous);
    CHECK(spde_term_audit(b, model, TestFunction::quadratic(0, 1)).term_I.has_value());
    CHECK_THROWS_AS(spde_term_audit(b, h, r, TestFunction::coordinate(3)), UnsupportedTestFunction);
}

TEST_CASE("test function parsing and sweep") {
    CHECK(parse_test_function("coordinate(2)").k == 2);
    const TestFunction q = parse_test_function("quadratic(0,1)");
    CHECK(q.kind == TestFunction::Kind::Quadratic);
    CHECK(q.l == 1);
    CHECK_THROWS_AS(parse_test_function("cubic(0,1,2)"), UnsupportedTestFunction);
    const SpdeSweepSummary s = spde_audit_sweep(50, 4, 19);
    CHECK(s.beliefs == 50);
    CHECK(s.violations == 0);
}
