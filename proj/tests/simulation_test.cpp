#include "support.hpp"

#include "zib/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace zib;

namespace {
auto scalar(double v) -> Parameters
{
    Parameters t{Vector(1), Vector(0)};
    t.beta << v;
    return t;
}

struct Moments {
    double mean;
    double var;
    double mu4; // fourth central moment
};

auto ridge(double lambda) -> PenaltySpec { return PenaltySpec::make(PenaltyFamily::ridge, lambda); }
} // namespace

TEST(Metrics, HandArithmetic)
{
    auto const r = metrics({scalar(1.1), scalar(0.9)}, scalar(1.0));
    ASSERT_EQ(r.parameters.size(), 1U);
    auto const& m = r.parameters[0];
    EXPECT_NEAR(m.bias, 0.0, 1e-15);
    EXPECT_NEAR(m.rmse, 0.1, 1e-15);
    EXPECT_NEAR(m.sd, std::sqrt(0.02), 1e-15);
    EXPECT_NEAR(m.se, 0.1, 1e-15);
    EXPECT_NEAR(*m.rel_bias, 0.0, 1e-15);
    EXPECT_FALSE(m.coverage.has_value());
}

TEST(Metrics, ExactEstimates)
{
    auto const truth = scalar(-0.65);
    std::vector<ReplicateIntervals> ci(3, ReplicateIntervals{Interval{-1.0, 0.0}});
    auto const r = metrics({truth, truth, truth}, truth, ci);
    auto const& m = r.parameters[0];
    EXPECT_EQ(m.bias, 0.0);
    EXPECT_EQ(m.rmse, 0.0);
    EXPECT_EQ(m.sd, 0.0);
    EXPECT_EQ(*m.coverage, 1.0);
    EXPECT_DOUBLE_EQ(*m.ci_length, 1.0);
}

TEST(Metrics, RelativeBiasAbsentForZeroTruth)
{
    auto const r = metrics({scalar(0.2), scalar(0.1)}, scalar(0.0));
    EXPECT_FALSE(r.parameters[0].rel_bias.has_value());
}

TEST(Metrics, NominalCoverageOfNormalDraws)
{
    // theta_hat ~ N(theta0, 0.3^2) with exact-SE 95% intervals
    std::mt19937_64 rng{99};
    std::normal_distribution<double> noise{0.0, 0.3};
    auto const z = inverse_normal_cdf(0.975);
    std::vector<Parameters> estimates;
    std::vector<ReplicateIntervals> intervals;
    for (int k = 0; k < 5000; ++k) {
        auto const v = 2.0 + noise(rng);
        estimates.push_back(scalar(v));
        intervals.push_back({Interval{v - z * 0.3, v + z * 0.3}});
    }
    auto const r = metrics(estimates, scalar(2.0), intervals);
    EXPECT_GE(*r.parameters[0].coverage, 0.94);
    EXPECT_LE(*r.parameters[0].coverage, 0.96);
    EXPECT_EQ(r.parameters[0].interval_count, 5000U);
}

TEST(Metrics, VarianceDecomposition)
{
    std::mt19937_64 rng{5};
    std::vector<Parameters> estimates;
    for (int k = 0; k < 37; ++k) { estimates.push_back(fixtures::random_parameters(3, 2, rng)); }
    auto const truth = fixtures::random_parameters(3, 2, rng);
    auto const r = metrics(estimates, truth);
    auto const n = 37.0;
    for (auto const& m : r.parameters) {
        EXPECT_NEAR(m.rmse * m.rmse, m.bias * m.bias + (n - 1.0) / n * m.sd * m.sd, 1e-12) << m.name;
    }
}

TEST(Metrics, Errors)
{
    EXPECT_THROW(metrics({}, scalar(0.0)), zib::domain_error);
    EXPECT_THROW(metrics({Parameters::zeros(2, 0)}, scalar(0.0)), shape_error);
}

TEST(Generator, CovariateMoments)
{
    constexpr Eigen::Index n = 100000;
    auto rng = replicate_rng(8, 0);
    auto const [X, Z] = generate_covariates(n, rng);
    ASSERT_TRUE((X.col(0).array() == 1.0).all());
    ASSERT_TRUE((Z.col(0).array() == 1.0).all());

    auto const check = [&](const Matrix& M, Eigen::Index col, Moments want, const char* label) {
        Vector const v = M.col(col);
        auto const mean = v.mean();
        auto const var = (v.array() - mean).square().sum() / (n - 1.0);
        auto const se_mean = std::sqrt(want.var / n);
        // exact finite-sample variance of s^2
        auto const se_var = std::sqrt((want.mu4 - want.var * want.var * (n - 3.0) / (n - 1.0)) / n);
        EXPECT_LT(std::abs(mean - want.mean), 4.0 * se_mean) << label;
        EXPECT_LT(std::abs(var - want.var), 4.0 * se_var) << label;
    };
    check(X, 1, {0.0, 1.0, 3.0}, "X2");
    check(X, 2, {0.9, 0.09, 0.0657}, "X3");
    check(X, 3, {3.5, 0.75, 1.0125}, "X4");
    check(X, 4, {2.5, 1.25, 4.0625}, "X5");
    check(Z, 1, {-1.0, 1.0, 3.0}, "Z2");
    check(Z, 2, {0.5, 0.25, 0.0625}, "Z3");
    check(Z, 3, {1.0, 1.0, 9.0}, "Z4");
    check(Z, 4, {1.0 / 3.0, 1.0 / 9.0, 1.0 / 9.0}, "Z5");

    EXPECT_NEAR(X.col(3).mean(), 3.5, 0.02);
    EXPECT_NEAR(X.col(4).mean(), 2.5, 0.02);
    EXPECT_NEAR(Z.col(3).mean(), 1.0, 0.02);

    // binary and count columns take only their support values
    EXPECT_TRUE((X.col(2).array() == 0.0 || X.col(2).array() == 1.0).all());
    EXPECT_TRUE((X.col(4).array() == X.col(4).array().round()).all());
    EXPECT_GE(X.col(4).minCoeff(), 0.0);
    EXPECT_LE(X.col(4).maxCoeff(), 5.0);
    EXPECT_GE(X.col(3).minCoeff(), 2.0);
    EXPECT_LE(X.col(3).maxCoeff(), 5.0);
}

TEST(Generator, RejectsEmptyDesign)
{
    Rng rng{1};
    EXPECT_THROW(generate_covariates(0, rng), zib::domain_error);
}

TEST(Generator, NoInflationLimitIsLogistic)
{
    auto scenario = builtin_scenario(1);
    scenario.gamma0 << -50.0, 0.0, 0.0, 0.0, 0.0;
    constexpr Eigen::Index n = 100000;
    auto rng = replicate_rng(21, 0);
    auto const [X, Z] = generate_covariates(n, rng);
    auto const y = generate_response(scenario, X, Z, rng);

    // chi-square over ten equal-count bins of p = logistic(beta0'x)
    std::vector<std::pair<double, double>> rows; // (p, y)
    for (Eigen::Index i = 0; i < n; ++i) {
        rows.emplace_back(1.0 / (1.0 + std::exp(-X.row(i).dot(scenario.beta0))), y[i]);
    }
    std::sort(rows.begin(), rows.end());
    constexpr int bins = 10;
    double statistic = 0.0;
    for (int b = 0; b < bins; ++b) {
        double observed = 0.0;
        double expected = 0.0;
        double variance = 0.0;
        for (auto i = b * n / bins; i < (b + 1) * n / bins; ++i) {
            auto const [p, yi] = rows[static_cast<std::size_t>(i)];
            observed += yi;
            expected += p;
            variance += p * (1.0 - p);
        }
        statistic += (observed - expected) * (observed - expected) / variance;
    }
    EXPECT_LT(statistic, 23.209); // chi-square(10) upper 1% point
}

TEST(Generator, ResponseShapeMismatch)
{
    Rng rng{2};
    EXPECT_THROW(generate_response(builtin_scenario(1), Matrix::Ones(4, 3), Matrix::Ones(4, 5), rng),
                 shape_error);
    EXPECT_THROW(builtin_scenario(3), validation_error);
}

TEST(RunStudy, TwoReplicates)
{
    auto const r = run_study(builtin_scenario(1), 300, 2, ridge(0.01), {}, 11);
    EXPECT_EQ(r.replicates, 2U);
    EXPECT_EQ(r.successes() + r.failures, 2U);
    ASSERT_EQ(r.parameters.size(), 10U);
    for (auto const& m : r.parameters) {
        EXPECT_GE(m.rmse, std::abs(m.bias) - 1e-12) << m.name;
        if (m.coverage) {
            EXPECT_GE(*m.coverage, 0.0);
            EXPECT_LE(*m.coverage, 1.0);
        }
    }
    EXPECT_FALSE(r.parameters[4].rel_bias.has_value()); // beta5 = 0
    EXPECT_FALSE(r.parameters[9].rel_bias.has_value()); // gamma5 = 0
    EXPECT_TRUE(r.parameters[0].rel_bias.has_value());
}

TEST(RunStudy, IndependentOfThreadCount)
{
    auto const scenario = builtin_scenario(1);
    auto const one = run_study(scenario, 200, 12, ridge(0.01), {}, 5, {1, 0.95});
    auto const four = run_study(scenario, 200, 12, ridge(0.01), {}, 5, {4, 0.95});
    ASSERT_EQ(one.estimates.size(), four.estimates.size());
    for (std::size_t k = 0; k < one.estimates.size(); ++k) { EXPECT_EQ(one.estimates[k], four.estimates[k]); }
    for (std::size_t j = 0; j < one.parameters.size(); ++j) {
        EXPECT_EQ(one.parameters[j].rmse, four.parameters[j].rmse);
        EXPECT_EQ(one.parameters[j].coverage, four.parameters[j].coverage);
    }
    EXPECT_EQ(one.failures, four.failures);
}

TEST(RunStudy, HalfStudiesPoolToFullStudy)
{
    auto const scenario = builtin_scenario(1);
    constexpr std::size_t N = 16;
    auto const spec = ridge(0.01);
    auto const full = run_study(scenario, 300, N, spec, {}, 77);

    std::vector<Parameters> first;
    std::vector<Parameters> second;
    for (std::size_t r = 0; r < N; ++r) {
        auto const o = detail::run_replicate(scenario, 300, spec, {}, 77, r, 0.95);
        if (!o.ok) { continue; }
        (r < N / 2 ? first : second).push_back(o.estimate);
    }
    std::vector<Parameters> pooled = first;
    pooled.insert(pooled.end(), second.begin(), second.end());
    ASSERT_EQ(pooled.size(), full.successes());

    auto const a = metrics(first, scenario.truth());
    auto const b = metrics(second, scenario.truth());
    auto const all = metrics(pooled, scenario.truth());
    auto const na = static_cast<double>(first.size());
    auto const nb = static_cast<double>(second.size());
    auto const nt = na + nb;
    for (std::size_t j = 0; j < full.parameters.size(); ++j) {
        EXPECT_EQ(all.parameters[j].bias, full.parameters[j].bias);
        EXPECT_NEAR((na * a.parameters[j].bias + nb * b.parameters[j].bias) / nt, full.parameters[j].bias,
                    1e-12);
        // pooled sample variance from the halves
        auto const ma = a.parameters[j].mean;
        auto const mb = b.parameters[j].mean;
        auto const m = full.parameters[j].mean;
        auto const ss = (na - 1.0) * std::pow(a.parameters[j].sd, 2) + (nb - 1.0) * std::pow(b.parameters[j].sd, 2) +
                        na * (ma - m) * (ma - m) + nb * (mb - m) * (mb - m);
        EXPECT_NEAR(std::sqrt(ss / (nt - 1.0)), full.parameters[j].sd, 1e-12);
    }
}

TEST(RunStudy, HeavierInflationIsNoisier)
{
    auto const one = run_study(builtin_scenario(1), 500, 40, ridge(0.01), {}, 3);
    auto const two = run_study(builtin_scenario(2), 500, 40, ridge(0.01), {}, 3);
    EXPECT_GT(two.mean_rmse(), one.mean_rmse());
}

TEST(RunStudy, Errors)
{
    auto const scenario = builtin_scenario(1);
    EXPECT_THROW(run_study(scenario, 100, 1, ridge(0.01), {}, 1), zib::domain_error);
    FitOptions starved;
    starved.max_iterations = 1;
    EXPECT_THROW(run_study(scenario, 100, 3, PenaltySpec::make(PenaltyFamily::lasso, 0.01), starved, 1),
                 study_error);
}

TEST(LambdaSweep, SharesDatasetsAcrossGrid)
{
    auto const scenario = builtin_scenario(1);
    LambdaGrid grid;
    grid.values = {0.01, 10.0};
    auto const spec = ridge(0.0);
    auto const sweep = run_lambda_sweep(scenario, 300, 4, spec, grid, {}, 9);
    ASSERT_EQ(sweep.size(), 2U);
    EXPECT_EQ(sweep[0].spec.lambda_beta, 0.01);
    EXPECT_EQ(sweep[1].spec.lambda_gamma, 10.0);
    ASSERT_EQ(sweep[0].successes(), 4U);
    ASSERT_EQ(sweep[1].successes(), 4U);
    // same datasets: the stronger ridge shrinks each replicate's estimate
    for (std::size_t r = 0; r < 4; ++r) { EXPECT_LT(sweep[1].estimates[r].norm(), sweep[0].estimates[r].norm()); }

    // each grid point matches a standalone study on the same seed
    auto const single = run_study(scenario, 300, 4, ridge(10.0), {}, 9);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_LT((single.estimates[r] - sweep[1].estimates[r]).cwiseAbs().maxCoeff(), 1e-5);
    }
}
