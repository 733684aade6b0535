#pragma once

#include "zib/model.hpp"
#include "zib/optimizer.hpp"
#include "zib/penalty.hpp"
#include "zib/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

/// \file simulation.hpp
///
/// Monte Carlo study of the penalized ZIB estimator.
///
/// Covariates (column 1 of each design is the intercept):
///
///     X2 ~ Normal(0, 1)      Z2 ~ Normal(-1, 1)
///     X3 ~ Bernoulli(0.9)    Z3 ~ Bernoulli(0.5)
///     X4 ~ Uniform[2, 5]     Z4 ~ Exponential(rate 1)
///     X5 ~ Binomial(5, 0.5)  Z5 ~ Exponential(rate 3)
///
/// Each replicate draws from its own generator seeded by (seed, replicate
/// index), so reports do not depend on the number of worker threads.

namespace zib {

using Rng = std::mt19937_64;

struct Scenario {
    std::string name;
    Vector beta0;
    Vector gamma0;
    double expected_zero_inflation = 0.0;

    [[nodiscard]] auto truth() const -> Parameters { return {beta0, gamma0}; }
};

/// Built-in designs: 1 (nominal 25% immunes) and 2 (nominal 50% immunes).
inline auto builtin_scenario(int id) -> Scenario
{
    Vector beta(5);
    beta << -0.9, -0.65, -0.2, 0.65, 0.0;
    Vector gamma(5);
    switch (id) {
        case 1:
            gamma << -0.55, -0.7, -1.0, 0.45, 0.0;
            return {"scenario1", beta, gamma, 0.25};
        case 2:
            gamma << 0.25, -0.4, 0.8, 0.45, 0.0;
            return {"scenario2", beta, gamma, 0.50};
        default: throw validation_error{"unknown scenario " + std::to_string(id) + " (expected 1 or 2)"};
    }
}

/// Independent stream for replicate `index` of a study seeded with `seed`.
inline auto replicate_rng(std::uint64_t seed, std::uint64_t index) -> Rng
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x5a1bU};
    return Rng{seq};
}

inline auto generate_covariates(Eigen::Index n, Rng& rng) -> std::pair<Matrix, Matrix>
{
    if (n < 1) { throw domain_error{"generate_covariates: n must be at least 1"}; }
    std::normal_distribution<double> x2{0.0, 1.0};
    std::bernoulli_distribution x3{0.9};
    std::uniform_real_distribution<double> x4{2.0, 5.0};
    std::binomial_distribution<int> x5{5, 0.5};
    std::normal_distribution<double> z2{-1.0, 1.0};
    std::bernoulli_distribution z3{0.5};
    std::exponential_distribution<double> z4{1.0};
    std::exponential_distribution<double> z5{3.0};

    Matrix X(n, 5);
    Matrix Z(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = x2(rng);
        X(i, 2) = x3(rng) ? 1.0 : 0.0;
        X(i, 3) = x4(rng);
        X(i, 4) = static_cast<double>(x5(rng));
        Z(i, 0) = 1.0;
        Z(i, 1) = z2(rng);
        Z(i, 2) = z3(rng) ? 1.0 : 0.0;
        Z(i, 3) = z4(rng);
        Z(i, 4) = z5(rng);
    }
    return {std::move(X), std::move(Z)};
}

/// Structural zero with probability pi_i, otherwise Bernoulli(p_i).
inline auto generate_response(const Scenario& scenario, const Matrix& X, const Matrix& Z, Rng& rng)
    -> Vector
{
    if (X.cols() != scenario.beta0.size() || Z.cols() != scenario.gamma0.size() ||
        X.rows() != Z.rows()) {
        throw shape_error{"generate_response: designs do not match the scenario"};
    }
    std::uniform_real_distribution<double> unit{0.0, 1.0};
    Vector y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        auto const pi = logistic(Z.row(i).dot(scenario.gamma0));
        auto const p = logistic(X.row(i).dot(scenario.beta0));
        auto const structural = unit(rng) < pi;
        auto const event = unit(rng) < p;
        y[i] = (!structural && event) ? 1.0 : 0.0;
    }
    return y;
}

inline auto simulate_dataset(const Scenario& scenario, Eigen::Index n, Rng& rng) -> Dataset
{
    auto [X, Z] = generate_covariates(n, rng);
    auto y = generate_response(scenario, X, Z, rng);
    return {std::move(y), std::move(X), std::move(Z)};
}

// ============================== Metrics ==================================

struct ParameterMetrics {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    std::optional<double> rel_bias; ///< absent when the true value is 0
    double sd = 0.0;                ///< sample standard deviation (divisor N - 1)
    double se = 0.0;                ///< Monte Carlo standard error SD / sqrt(N)
    double rmse = 0.0;
    std::optional<double> ci_length;
    std::optional<double> coverage;
    std::size_t interval_count = 0;
};

struct SimulationReport {
    std::string scenario;
    Eigen::Index n = 0;
    std::size_t replicates = 0; ///< requested N
    std::size_t failures = 0;
    std::uint64_t seed = 0;
    PenaltySpec spec;
    double level = 0.95;
    double mean_log_likelihood = 0.0;
    double mean_aic = 0.0;
    std::vector<ParameterMetrics> parameters;
    std::vector<Vector> estimates; ///< flattened estimates of successful replicates

    [[nodiscard]] auto successes() const -> std::size_t { return estimates.size(); }

    [[nodiscard]] auto mean_rmse() const -> double
    {
        double total = 0.0;
        for (auto const& p : parameters) { total += p.rmse; }
        return parameters.empty() ? 0.0 : total / static_cast<double>(parameters.size());
    }
};

inline auto parameter_names(Eigen::Index p, Eigen::Index q) -> std::vector<std::string>
{
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < p; ++j) { names.push_back("beta" + std::to_string(j + 1)); }
    for (Eigen::Index j = 0; j < q; ++j) { names.push_back("gamma" + std::to_string(j + 1)); }
    return names;
}

using ReplicateIntervals = std::vector<std::optional<Interval>>;

/// Aggregates replicate estimates against the truth. `intervals` is either
/// empty or holds one entry per estimate.
inline auto metrics(const std::vector<Parameters>& estimates, const Parameters& theta0,
                    const std::vector<ReplicateIntervals>& intervals = {}) -> SimulationReport
{
    if (estimates.empty()) { throw domain_error{"metrics: no estimates"}; }
    if (!intervals.empty() && intervals.size() != estimates.size()) {
        throw shape_error{"metrics: one interval set per estimate required"};
    }
    auto const truth = theta0.flat();
    auto const d = truth.size();
    auto const count = static_cast<double>(estimates.size());
    auto const names = parameter_names(theta0.beta.size(), theta0.gamma.size());

    SimulationReport report;
    report.replicates = estimates.size();
    for (auto const& e : estimates) {
        if (e.beta.size() != theta0.beta.size() || e.gamma.size() != theta0.gamma.size()) {
            throw shape_error{"metrics: estimate dimension mismatch"};
        }
        report.estimates.push_back(e.flat());
    }

    for (Eigen::Index j = 0; j < d; ++j) {
        ParameterMetrics m;
        m.name = names[static_cast<std::size_t>(j)];
        m.truth = truth[j];
        double sum = 0.0;
        double sum_sq_err = 0.0;
        for (auto const& e : report.estimates) {
            sum += e[j];
            sum_sq_err += (e[j] - truth[j]) * (e[j] - truth[j]);
        }
        m.mean = sum / count;
        m.bias = m.mean - truth[j];
        if (truth[j] != 0.0) { m.rel_bias = m.bias / truth[j]; }
        double centered = 0.0;
        for (auto const& e : report.estimates) { centered += (e[j] - m.mean) * (e[j] - m.mean); }
        m.sd = estimates.size() > 1 ? std::sqrt(centered / (count - 1.0)) : 0.0;
        m.se = m.sd / std::sqrt(count);
        m.rmse = std::sqrt(sum_sq_err / count);

        double length = 0.0;
        std::size_t covered = 0;
        for (auto const& set : intervals) {
            auto const& ci = set[static_cast<std::size_t>(j)];
            if (!ci) { continue; }
            ++m.interval_count;
            length += ci->length();
            if (ci->contains(truth[j])) { ++covered; }
        }
        if (m.interval_count > 0) {
            m.ci_length = length / static_cast<double>(m.interval_count);
            m.coverage = static_cast<double>(covered) / static_cast<double>(m.interval_count);
        }
        report.parameters.push_back(std::move(m));
    }
    return report;
}

// ============================ Study runner ===============================

struct StudyOptions {
    std::size_t threads = 1;
    double level = 0.95;
};

class study_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {
    struct ReplicateOutcome {
        bool ok = false;
        Parameters estimate;
        ReplicateIntervals intervals;
        double log_likelihood = 0.0;
        double aic = 0.0;
    };

    inline auto run_replicate(const Scenario& scenario, Eigen::Index n, const PenaltySpec& spec,
                              const FitOptions& options, std::uint64_t seed, std::uint64_t index,
                              double level) -> ReplicateOutcome
    {
        ReplicateOutcome out;
        auto rng = replicate_rng(seed, index);
        auto const data = simulate_dataset(scenario, n, rng);
        try {
            auto const result = fit_penalized(data, spec, options);
            if (!result.converged) { return out; }
            out.ok = true;
            out.estimate = result.theta_hat;
            out.intervals = wald_intervals(result, level);
            out.log_likelihood = result.log_likelihood_at_solution;
            out.aic = aic(result);
        }
        catch (const numerical_error&) {
            out.ok = false;
        }
        return out;
    }
    inline auto aggregate(std::vector<ReplicateOutcome> outcomes, const Scenario& scenario,
                          Eigen::Index n, std::uint64_t seed, const PenaltySpec& spec,
                          double level) -> SimulationReport
    {
        auto const replicates = outcomes.size();
        std::vector<Parameters> estimates;
        std::vector<ReplicateIntervals> intervals;
        double loglik = 0.0;
        double aic_total = 0.0;
        for (auto& o : outcomes) {
            if (!o.ok) { continue; }
            estimates.push_back(std::move(o.estimate));
            intervals.push_back(std::move(o.intervals));
            loglik += o.log_likelihood;
            aic_total += o.aic;
        }
        if (estimates.empty()) { throw study_error{"every replicate fit failed"}; }

        auto report = metrics(estimates, scenario.truth(), intervals);
        report.scenario = scenario.name;
        report.n = n;
        report.replicates = replicates;
        report.failures = replicates - estimates.size();
        report.seed = seed;
        report.spec = spec;
        report.level = level;
        report.mean_log_likelihood = loglik / static_cast<double>(estimates.size());
        report.mean_aic = aic_total / static_cast<double>(estimates.size());
        return report;
    }
} // namespace detail

/// Simulates `replicates` datasets of size n, fits each, and aggregates the
/// converged fits. Failed fits are counted and left out of every aggregate.
inline auto run_study(const Scenario& scenario, Eigen::Index n, std::size_t replicates,
                      const PenaltySpec& spec, const FitOptions& options, std::uint64_t seed,
                      const StudyOptions& study = {}) -> SimulationReport
{
    if (replicates < 2) { throw domain_error{"run_study: at least 2 replicates required"}; }
    if (n < 1) { throw domain_error{"run_study: n must be at least 1"}; }
    validate_penalty(spec);
    validate_options(options);

    std::vector<detail::ReplicateOutcome> outcomes(replicates);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            auto const r = next.fetch_add(1);
            if (r >= replicates || failed.load()) { return; }
            try {
                outcomes[r] =
                    detail::run_replicate(scenario, n, spec, options, seed, r, study.level);
            }
            catch (...) {
                if (!failed.exchange(true)) { failure = std::current_exception(); }
                return;
            }
        }
    };
    auto const threads = std::max<std::size_t>(1, std::min(study.threads, replicates));
    if (threads == 1) {
        worker();
    }
    else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) { pool.emplace_back(worker); }
        for (auto& t : pool) { t.join(); }
    }
    if (failure) { std::rethrow_exception(failure); }

    return detail::aggregate(std::move(outcomes), scenario, n, seed, spec, study.level);
}

/// Per-lambda reports for a grid of strengths. Every replicate dataset is
/// fitted along a warm-started path (largest lambda first), so all grid values
/// see the same datasets.
inline auto run_lambda_sweep(const Scenario& scenario, Eigen::Index n, std::size_t replicates,
                             const PenaltySpec& base, const LambdaGrid& grid,
                             const FitOptions& options, std::uint64_t seed,
                             const StudyOptions& study = {}) -> std::vector<SimulationReport>
{
    if (replicates < 2) { throw domain_error{"run_lambda_sweep: at least 2 replicates required"}; }
    if (n < 1) { throw domain_error{"run_lambda_sweep: n must be at least 1"}; }
    validate_grid(grid);
    validate_penalty(base);
    validate_options(options);
    auto const points = grid.values.size();

    // outcomes[r][g]
    std::vector<std::vector<detail::ReplicateOutcome>> outcomes(replicates);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            auto const r = next.fetch_add(1);
            if (r >= replicates || failed.load()) { return; }
            try {
                auto rng = replicate_rng(seed, r);
                auto const data = simulate_dataset(scenario, n, rng);
                auto const path = detail::run_path(data, base, grid, options);
                auto& row = outcomes[r];
                row.resize(points);
                for (std::size_t g = 0; g < points; ++g) {
                    auto const& e = path[g];
                    if (!e.usable()) { continue; }
                    row[g].ok = true;
                    row[g].estimate = e.fit->theta_hat;
                    row[g].intervals = wald_intervals(*e.fit, study.level);
                    row[g].log_likelihood = e.fit->log_likelihood_at_solution;
                    row[g].aic = e.aic;
                }
            }
            catch (...) {
                if (!failed.exchange(true)) { failure = std::current_exception(); }
                return;
            }
        }
    };
    auto const threads = std::max<std::size_t>(1, std::min(study.threads, replicates));
    if (threads == 1) {
        worker();
    }
    else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) { pool.emplace_back(worker); }
        for (auto& t : pool) { t.join(); }
    }
    if (failure) { std::rethrow_exception(failure); }

    std::vector<SimulationReport> reports;
    reports.reserve(points);
    for (std::size_t g = 0; g < points; ++g) {
        std::vector<detail::ReplicateOutcome> column;
        column.reserve(replicates);
        for (auto& row : outcomes) { column.push_back(std::move(row[g])); }
        reports.push_back(detail::aggregate(std::move(column), scenario, n, seed,
                                            detail::with_lambda(base, grid.values[g]), study.level));
    }
    return reports;
}

} // namespace zib
