#include "support.hpp"

#include "zib/optimizer.hpp"
#include "zib/selection.hpp"
#include "zib/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace zib;

namespace {

auto penalized_indices(const FitResult& r) -> std::vector<Eigen::Index>
{
    auto const s = coordinate_strengths(r.spec, r.theta_hat.beta.size(), r.theta_hat.gamma.size(), r.n_obs);
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        if (s[j] != 0.0) { out.push_back(j); }
    }
    return out;
}

class ScenarioOne : public ::testing::Test {
  protected:
    static void SetUpTestSuite() { data_ = fixtures::acceptance_dataset(); }
    static Dataset data_;
};
Dataset ScenarioOne::data_;

} // namespace

TEST_F(ScenarioOne, ProximalAndNewtonAgreeWithoutPenalty)
{
    auto const prox = fit(data_, PenaltySpec::none());
    auto const newton = fit_unpenalized(data_);
    ASSERT_TRUE(prox.converged) << to_string(prox.status);
    ASSERT_TRUE(newton.converged) << to_string(newton.status);
    EXPECT_LT((prox.theta_hat.flat() - newton.theta_hat.flat()).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LE(kkt_check(prox, data_).max_violation, 1e-4);
    EXPECT_LE(kkt_check(newton, data_).max_violation, 1e-4);
}

TEST_F(ScenarioOne, KktWithoutPenaltyIsScoreNorm)
{
    auto const r = fit_unpenalized(data_);
    EXPECT_DOUBLE_EQ(kkt_check(r, data_).max_violation, score(r.theta_hat, data_).cwiseAbs().maxCoeff());
}

TEST_F(ScenarioOne, HeavyLassoZeroesEveryPenalizedCoefficient)
{
    auto const r = fit(data_, PenaltySpec::make(PenaltyFamily::lasso, 1000.0));
    ASSERT_TRUE(r.converged);
    for (auto j : penalized_indices(r)) { EXPECT_EQ(r.theta_hat.flat()[j], 0.0) << "coordinate " << j; }
    EXPECT_TRUE(r.active_set.empty());
    EXPECT_EQ(r.degrees_of_freedom(), 0);
    EXPECT_LE(kkt_check(r, data_).max_violation, 1e-4);
}

TEST_F(ScenarioOne, HeavyLassoWithExemptInterceptsKeepsOnlyIntercepts)
{
    auto spec = PenaltySpec::make(PenaltyFamily::lasso, 1000.0);
    spec.penalize_intercepts = false;
    auto const r = fit(data_, spec);
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.theta_hat.beta.tail(4).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.theta_hat.gamma.tail(4).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(kkt_check(r, data_).max_violation, 1e-4);
}

TEST_F(ScenarioOne, KktCertifiesLassoAndDetectsPerturbation)
{
    for (double lambda : {0.5, 5.0, 20.0}) {
        auto const r = fit(data_, PenaltySpec::make(PenaltyFamily::lasso, lambda));
        ASSERT_TRUE(r.converged) << lambda;
        EXPECT_LE(kkt_check(r, data_).max_violation, 1e-4) << lambda;

        auto perturbed = r;
        perturbed.theta_hat.beta[1] += 0.1;
        EXPECT_GT(kkt_check(perturbed, data_).max_violation, 1e-2) << lambda;
    }
}

TEST_F(ScenarioOne, ElasticNetConverges)
{
    auto const r = fit(data_, PenaltySpec::make(PenaltyFamily::elastic_net, 2.0, 0.5));
    ASSERT_TRUE(r.converged);
    EXPECT_LE(kkt_check(r, data_).max_violation, 1e-4);
}

TEST_F(ScenarioOne, RidgeSolversAgree)
{
    auto const spec = PenaltySpec::make(PenaltyFamily::ridge, 0.3);
    auto const prox = fit(data_, spec);
    auto const newton = fit_smooth(data_, spec);
    ASSERT_TRUE(prox.converged);
    ASSERT_TRUE(newton.converged);
    EXPECT_LT((prox.theta_hat.flat() - newton.theta_hat.flat()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST_F(ScenarioOne, WarmStartTerminatesImmediately)
{
    for (auto const& spec : {PenaltySpec::make(PenaltyFamily::lasso, 2.0), PenaltySpec::none(),
                             PenaltySpec::make(PenaltyFamily::elastic_net, 1.0, 0.3)}) {
        auto const first = fit(data_, spec);
        ASSERT_TRUE(first.converged);
        FitOptions warm;
        warm.initial_theta = first.theta_hat;
        auto const again = fit(data_, spec, warm);
        EXPECT_TRUE(again.converged);
        EXPECT_LE(again.iterations, 2U) << to_string(spec.family) << " " << spec.lambda_beta
                                        << " residual " << first.residual << " -> " << again.residual;
    }
    auto const newton = fit_unpenalized(data_);
    FitOptions warm;
    warm.initial_theta = newton.theta_hat;
    EXPECT_LE(fit_unpenalized(data_, warm).iterations, 2U);
}

TEST_F(ScenarioOne, ObjectiveTraceIsMonotone)
{
    FitOptions options;
    options.record_objective_trace = true;
    for (auto const& spec : {PenaltySpec::make(PenaltyFamily::lasso, 3.0), PenaltySpec::none()}) {
        auto const r = fit(data_, spec, options);
        ASSERT_GE(r.objective_trace.size(), 2U);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
            auto const prev = r.objective_trace[k - 1];
            auto const next = r.objective_trace[k];
            // rounding noise of F is the only permitted increase
            auto const slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(prev));
            EXPECT_LE(next, prev + slack) << "iteration " << k;
        }
    }
}

TEST_F(ScenarioOne, Deterministic)
{
    auto const spec = PenaltySpec::make(PenaltyFamily::lasso, 0.7);
    auto const a = fit(data_, spec);
    auto const b = fit(data_, spec);
    EXPECT_EQ(a.theta_hat, b.theta_hat);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST_F(ScenarioOne, RidgePathShrinksMonotonically)
{
    auto const path = detail::run_path(data_, PenaltySpec::make(PenaltyFamily::ridge, 0.0),
                                       LambdaGrid::default_grid(), {});
    double previous = std::numeric_limits<double>::infinity();
    for (auto const& e : path) {
        ASSERT_TRUE(e.usable()) << e.lambda;
        auto const size = e.fit->theta_hat.flat().squaredNorm();
        EXPECT_LT(size, previous) << "lambda " << e.lambda;
        previous = size;
    }
}

TEST_F(ScenarioOne, LassoActiveSetShrinksAlongPath)
{
    auto const path = detail::run_path(data_, PenaltySpec::make(PenaltyFamily::lasso, 0.0),
                                       LambdaGrid::default_grid(), {});
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (auto const& e : path) {
        ASSERT_TRUE(e.usable()) << e.lambda;
        EXPECT_LE(e.fit->active_set.size(), previous) << "lambda " << e.lambda;
        previous = e.fit->active_set.size();
    }
    EXPECT_TRUE(path.back().fit->active_set.empty());
}

TEST(Fit, SymmetricBalancedDesignReproducesSampleRate)
{
    // x = +-1 with 30% events in each group: the fitted marginal event rate is
    // 0.3 everywhere and the slope vanishes.
    Dataset d{Vector(200), Matrix(200, 2), Matrix(200, 1)};
    for (Eigen::Index i = 0; i < 200; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = i < 100 ? -1.0 : 1.0;
        d.Z(i, 0) = 1.0;
        d.y[i] = (i % 100) < 30 ? 1.0 : 0.0;
    }
    auto const r = fit_unpenalized(d);
    ASSERT_TRUE(r.converged) << to_string(r.status);
    EXPECT_NEAR(r.theta_hat.beta[1], 0.0, 1e-6);
    Vector x(2);
    x << 1.0, 1.0;
    auto const m = mixture_probabilities(r.theta_hat, x, Vector::Ones(1));
    EXPECT_NEAR(m.p_one, 0.3, 1e-6);
    EXPECT_NEAR(r.log_likelihood_at_solution, 200.0 * (0.3 * std::log(0.3) + 0.7 * std::log(0.7)), 1e-6);
}

TEST(Fit, EstimatesNearTruthWithinReplicateSpread)
{
    // Replicate spread from an independent batch of datasets, then a fresh
    // dataset must land within 3 of those SDs for every coordinate.
    auto const scenario = builtin_scenario(1);
    auto const study = run_study(scenario, 2000, 30, PenaltySpec::none(), {}, 555);
    auto const d = fixtures::scenario_data(1, 2000, 777);
    auto const r = fit_unpenalized(d);
    ASSERT_TRUE(r.converged);
    auto const truth = scenario.truth().flat();
    auto const est = r.theta_hat.flat();
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
        EXPECT_LT(std::abs(est[j] - truth[j]), 3.0 * study.parameters[j].sd) << study.parameters[j].name;
    }

    auto const ridge = fit_penalized(fixtures::scenario_data(1, 1000, 778), PenaltySpec::make(PenaltyFamily::ridge, 0.01));
    auto const wide = run_study(scenario, 1000, 30, PenaltySpec::make(PenaltyFamily::ridge, 0.01), {}, 556);
    ASSERT_TRUE(ridge.converged);
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
        EXPECT_LT(std::abs(ridge.theta_hat.flat()[j] - truth[j]), 3.0 * wide.parameters[j].sd)
            << wide.parameters[j].name;
    }
}

TEST(Fit, SeparatedDataReportsDrift)
{
    Dataset d{Vector(40), Matrix(40, 2), Matrix(40, 1)};
    for (Eigen::Index i = 0; i < 40; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = 0.01 * (static_cast<double>(i) - 19.5);
        d.Z(i, 0) = 1.0;
        d.y[i] = i >= 20 ? 1.0 : 0.0;
    }
    auto const newton = fit_unpenalized(d);
    EXPECT_FALSE(newton.converged);
    EXPECT_EQ(newton.status, FitStatus::unbounded_drift);
    auto const prox = fit(d, PenaltySpec::none());
    EXPECT_FALSE(prox.converged);
}

TEST(Fit, RejectsBadInputs)
{
    std::mt19937_64 rng{1};
    auto const d = fixtures::random_dataset(30, 3, 2, rng);
    FitOptions bad;
    bad.gradient_tolerance = 0.0;
    EXPECT_THROW(fit(d, PenaltySpec::none(), bad), validation_error);

    FitOptions wrong_shape;
    wrong_shape.initial_theta = Parameters::zeros(2, 2);
    EXPECT_THROW(fit(d, PenaltySpec::none(), wrong_shape), shape_error);

    EXPECT_THROW(fit_smooth(d, PenaltySpec::make(PenaltyFamily::lasso, 1.0)), validation_error);
    EXPECT_THROW(fit(d, PenaltySpec::make(PenaltyFamily::ridge, -1.0)), validation_error);
}

TEST(Fit, NonFiniteStartIsANumericalError)
{
    std::mt19937_64 rng{2};
    auto const d = fixtures::random_dataset(30, 3, 2, rng);
    FitOptions options;
    options.initial_theta = Parameters::zeros(3, 2);
    options.initial_theta->beta[1] = 1e308;
    options.initial_theta->beta[2] = 1e308;
    EXPECT_THROW(fit(d, PenaltySpec::none(), options), numerical_error);
}
