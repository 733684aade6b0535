#pragma once

#include "zib/likelihood.hpp"
#include "zib/model.hpp"
#include "zib/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

/// \file optimizer.hpp
///
/// Penalized maximum likelihood for the ZIB model.
///
/// `fit` runs proximal gradient descent on F = -l_n + P,
///
///     theta_{k+1} = prox_{s P}(theta_k + s * score(theta_k)),
///
/// accepting a trial step s once F(theta+) <= F(theta) - sigma / (2 s) |theta+ - theta|^2
/// and halving it otherwise. Trial steps start from a Barzilai-Borwein estimate
/// of the local curvature (initial_step on the first iteration). L1 parts are
/// handled only through the prox, so LASSO solutions carry exact zeros.
///
/// `fit_smooth` / `fit_unpenalized` run damped Newton with the observed
/// information for penalties that are differentiable (lambda = 0 or ridge).

namespace zib {

struct FitOptions {
    std::size_t max_iterations = 10000;
    double objective_tolerance = 1e-9; ///< relative change regarded as a stall
    double gradient_tolerance = 1e-6;  ///< sup-norm of the prox-gradient mapping
    std::optional<Parameters> initial_theta;
    double line_search_shrink = 0.5;
    double initial_step = 1.0;
    bool record_objective_trace = false;
};

inline void validate_options(const FitOptions& options)
{
    if (!(options.objective_tolerance > 0.0) || !(options.gradient_tolerance > 0.0)) {
        throw validation_error{"fit tolerances must be positive"};
    }
    if (!(options.line_search_shrink > 0.0 && options.line_search_shrink < 1.0)) {
        throw validation_error{"line_search_shrink must lie in (0, 1)"};
    }
    if (!(options.initial_step > 0.0)) { throw validation_error{"initial_step must be positive"}; }
    if (options.max_iterations == 0) { throw validation_error{"max_iterations must be positive"}; }
}

enum class FitStatus {
    converged,
    max_iterations,
    stalled,         ///< objective stopped changing before the residual met tolerance
    unbounded_drift, ///< some coefficient exceeded the logit-scale magnitude cap
};

inline auto to_string(FitStatus status) -> std::string
{
    switch (status) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::stalled: return "stalled";
        case FitStatus::unbounded_drift: return "unbounded_drift";
    }
    return "unknown";
}

inline constexpr double drift_cap = 50.0;
inline constexpr double sufficient_decrease = 1e-4;

struct FitResult {
    Parameters theta_hat;
    bool converged = false;
    FitStatus status = FitStatus::max_iterations;
    std::size_t iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
    double final_objective = 0.0;
    double log_likelihood_at_solution = 0.0;
    double penalty_at_solution = 0.0;
    Matrix information_at_solution;
    std::vector<Eigen::Index> active_set; ///< flattened indices of nonzero penalized coefficients
    PenaltySpec spec;
    Eigen::Index n_obs = 0;
    std::size_t floor_hits = 0;
    std::vector<double> objective_trace; ///< F at each accepted iterate, when requested

    /// Penalized log-likelihood l_n - P at the solution.
    [[nodiscard]] auto penalized_log_likelihood() const noexcept -> double
    {
        return log_likelihood_at_solution - penalty_at_solution;
    }

    /// Nonzero coefficients across both blocks, intercepts included.
    [[nodiscard]] auto degrees_of_freedom() const -> Eigen::Index
    {
        return (theta_hat.beta.array() != 0.0).count() + (theta_hat.gamma.array() != 0.0).count();
    }
};

namespace detail {
    inline auto sup_norm(const Vector& v) -> double
    {
        return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
    }

    inline auto describe_iterate(const Vector& theta) -> std::string
    {
        std::ostringstream out;
        out.precision(17);
        out << "[";
        for (Eigen::Index j = 0; j < theta.size(); ++j) { out << (j ? ", " : "") << theta[j]; }
        out << "]";
        return out.str();
    }

    /// -l_n and its gradient on the flattened parameter vector. Returns +inf
    /// when the likelihood cannot be evaluated (non-finite linear predictors).
    struct NegativeLogLikelihood {
        const Dataset& data;
        EvalStats* stats;

        auto value(const Vector& theta) const -> double
        {
            try {
                auto const v = -log_likelihood(Parameters::from_flat(theta, data.p()), data, stats);
                return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
            }
            catch (const domain_error&) {
                return std::numeric_limits<double>::infinity();
            }
        }

        auto value_and_gradient(const Vector& theta) const -> std::pair<double, Vector>
        {
            try {
                auto [ll, g] = log_likelihood_and_score(Parameters::from_flat(theta, data.p()),
                                                        data, stats);
                return {-ll, -g};
            }
            catch (const domain_error&) {
                return {std::numeric_limits<double>::infinity(),
                        Vector::Constant(theta.size(), std::numeric_limits<double>::quiet_NaN())};
            }
        }
    };

    /// Size of rounding noise when comparing two objective values.
    inline auto objective_resolution(double a, double b) noexcept -> double
    {
        return 64.0 * std::numeric_limits<double>::epsilon() *
               std::max({1.0, std::abs(a), std::abs(b)});
    }

    inline auto flat_penalty(const Vector& strengths, double l1, double l2, const Vector& theta)
        -> double
    {
        double total = 0.0;
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            if (strengths[j] == 0.0) { continue; }
            total += strengths[j] * (l1 * std::abs(theta[j]) + l2 * theta[j] * theta[j]);
        }
        return total;
    }

    /// Sup-norm of the gradient mapping (theta - prox_s(theta - s g)) / s, each
    /// coordinate scaled by the ridge shrink factor 1 + 2 s lambda_j l2. The
    /// scaling makes the value independent of s: on coordinates whose sign is
    /// stable it equals the stationarity violation |g_j + dP_j|.
    inline auto mapping_residual(const Vector& theta, const Vector& next, const Vector& strengths,
                                 double l2, double step) -> double
    {
        auto const shrink = (1.0 + 2.0 * step * l2 * strengths.array()).matrix();
        return detail::sup_norm((theta - next).cwiseProduct(shrink)) / step;
    }

    inline void finish(FitResult& result, const Dataset& data, const Vector& theta,
                       const PenaltySpec& spec, const Vector& strengths, EvalStats& stats)
    {
        result.theta_hat = Parameters::from_flat(theta, data.p());
        result.spec = spec;
        result.n_obs = data.rows();
        result.log_likelihood_at_solution = log_likelihood(result.theta_hat, data, &stats);
        result.penalty_at_solution = penalty_value(spec, result.theta_hat, data.rows());
        result.final_objective = result.penalty_at_solution - result.log_likelihood_at_solution;
        result.information_at_solution = observed_information(result.theta_hat, data, &stats);
        result.active_set.clear();
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            if (strengths[j] != 0.0 && theta[j] != 0.0) { result.active_set.push_back(j); }
        }
        result.floor_hits = stats.floor_hits;
        result.converged = result.status == FitStatus::converged;
    }

    inline auto starting_point(const Dataset& data, const FitOptions& options) -> Vector
    {
        if (!options.initial_theta) { return Vector::Zero(data.p() + data.q()); }
        check_dimensions(*options.initial_theta, data);
        if (!options.initial_theta->all_finite()) {
            throw validation_error{"initial_theta contains non-finite values"};
        }
        return options.initial_theta->flat();
    }
} // namespace detail

/// Proximal gradient fit of the penalized estimator.
inline auto fit(const Dataset& data, const PenaltySpec& spec, const FitOptions& options = {})
    -> FitResult
{
    validate_options(options);
    validate_penalty(spec);
    EvalStats stats;
    detail::NegativeLogLikelihood const nll{data, &stats};
    auto const strengths = coordinate_strengths(spec, data.p(), data.q(), data.rows());
    auto const l1 = spec.l1_weight();
    auto const l2 = spec.l2_weight();

    FitResult result;
    Vector theta = detail::starting_point(data, options);
    auto [smooth, grad] = nll.value_and_gradient(theta);
    double objective = smooth + detail::flat_penalty(strengths, l1, l2, theta);
    if (!std::isfinite(objective)) {
        throw numerical_error{"fit: non-finite objective at initial iterate " +
                              detail::describe_iterate(theta)};
    }
    if (options.record_objective_trace) { result.objective_trace.push_back(objective); }

    double step = options.initial_step;
    double last_accepted_step = options.initial_step;
    std::size_t flat_iterations = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    result.status = FitStatus::max_iterations;

    for (std::size_t k = 0; k < options.max_iterations; ++k) {
        result.iterations = k + 1;
        Vector candidate;
        double candidate_objective = 0.0;
        double candidate_smooth = 0.0;
        Vector candidate_grad;
        bool accepted = false;
        while (step > 1e-300) {
            candidate = detail::prox_flat(strengths, l1, l2, theta - step * grad, step);
            Vector const move = candidate - theta;
            auto const move_sq = move.squaredNorm();
            if (move_sq == 0.0) { break; }
            std::tie(candidate_smooth, candidate_grad) = nll.value_and_gradient(candidate);
            candidate_objective =
                candidate_smooth + detail::flat_penalty(strengths, l1, l2, candidate);
            if (!std::isfinite(candidate_objective) || !candidate_grad.allFinite()) {
                step *= options.line_search_shrink;
                continue;
            }
            if (candidate_objective <= objective - sufficient_decrease / (2.0 * step) * move_sq) {
                accepted = true;
                break;
            }
            // Once the predicted decrease is below the rounding resolution of F,
            // objective comparisons carry no information. Fall back to the
            // gradient form of the local Lipschitz bound, which implies the
            // same sufficient decrease in exact arithmetic.
            auto const resolution = detail::objective_resolution(objective, candidate_objective);
            if (std::abs(candidate_objective - objective) <= resolution &&
                (candidate_grad - grad).dot(move) <= (1.0 - sufficient_decrease) / step * move_sq) {
                accepted = true;
                break;
            }
            step *= options.line_search_shrink;
        }

        if (!accepted) {
            // The gradient mapping vanished to working precision or no step
            // could be certified.
            auto const s = last_accepted_step;
            result.residual = detail::mapping_residual(
                theta, detail::prox_flat(strengths, l1, l2, theta - s * grad, s), strengths, l2, s);
            result.status = result.residual <= options.gradient_tolerance ? FitStatus::converged
                                                                           : FitStatus::stalled;
            break;
        }

        result.residual = detail::mapping_residual(theta, candidate, strengths, l2, step);
        last_accepted_step = step;
        auto const change = objective - candidate_objective;
        Vector const dx = candidate - theta;
        Vector const dg = candidate_grad - grad;

        theta = std::move(candidate);
        grad = std::move(candidate_grad);
        objective = candidate_objective;
        if (options.record_objective_trace) { result.objective_trace.push_back(objective); }

        if (result.residual <= options.gradient_tolerance) {
            result.status = FitStatus::converged;
            break;
        }
        if (detail::sup_norm(theta) > drift_cap) {
            result.status = FitStatus::unbounded_drift;
            break;
        }
        // No progress on either the objective or the residual for a long
        // stretch: give up rather than spin until max_iterations.
        if (result.residual < best_residual) {
            best_residual = result.residual;
            flat_iterations = 0;
        }
        else if (change <= options.objective_tolerance * std::max(1.0, std::abs(objective))) {
            if (++flat_iterations >= 500) {
                result.status = FitStatus::stalled;
                break;
            }
        }

        // Barzilai-Borwein trial step for the next iteration.
        auto const curvature = dx.dot(dg);
        if (curvature > 0.0) {
            step = std::clamp(dx.squaredNorm() / curvature, 1e-12, 1e12);
        }
        else {
            step = std::min(step * 2.0, 1e12);
        }
    }

    detail::finish(result, data, theta, spec, strengths, stats);
    return result;
}

/// Damped Newton on F = -l_n + P for differentiable penalties.
inline auto fit_smooth(const Dataset& data, const PenaltySpec& spec, const FitOptions& options = {})
    -> FitResult
{
    validate_options(options);
    validate_penalty(spec);
    if (!spec.is_smooth()) {
        throw validation_error{"fit_smooth: penalty has an L1 component; use fit"};
    }
    EvalStats stats;
    detail::NegativeLogLikelihood const nll{data, &stats};
    auto const strengths = coordinate_strengths(spec, data.p(), data.q(), data.rows());
    auto const l2 = spec.is_zero() ? 0.0 : spec.l2_weight();
    Vector const curvature = 2.0 * l2 * strengths;

    FitResult result;
    Vector theta = detail::starting_point(data, options);
    auto objective_at = [&](const Vector& t) {
        return nll.value(t) + detail::flat_penalty(strengths, 0.0, l2, t);
    };
    auto [smooth, grad] = nll.value_and_gradient(theta);
    double objective = smooth + detail::flat_penalty(strengths, 0.0, l2, theta);
    if (!std::isfinite(objective)) {
        throw numerical_error{"fit_smooth: non-finite objective at initial iterate " +
                              detail::describe_iterate(theta)};
    }
    grad += curvature.cwiseProduct(theta);
    if (options.record_objective_trace) { result.objective_trace.push_back(objective); }
    result.status = FitStatus::max_iterations;

    for (std::size_t k = 0; k < options.max_iterations; ++k) {
        result.residual = detail::sup_norm(grad);
        if (result.residual <= options.gradient_tolerance) {
            result.status = FitStatus::converged;
            break;
        }
        result.iterations = k + 1;

        Matrix hessian = observed_information(Parameters::from_flat(theta, data.p()), data, &stats);
        hessian.diagonal() += curvature;
        Vector direction;
        double shift = 0.0;
        auto const scale = std::max(1.0, hessian.diagonal().cwiseAbs().maxCoeff());
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix shifted = hessian;
            shifted.diagonal().array() += shift;
            Eigen::LLT<Matrix> llt(shifted);
            if (llt.info() == Eigen::Success) {
                direction = -llt.solve(grad);
                if (direction.allFinite() && direction.dot(grad) < 0.0) { break; }
            }
            shift = shift == 0.0 ? 1e-8 * scale : shift * 10.0;
            direction.resize(0);
        }
        if (direction.size() == 0) { direction = -grad; }

        auto const slope = direction.dot(grad);
        double t = 1.0;
        Vector candidate;
        double candidate_objective = 0.0;
        bool accepted = false;
        while (t > 1e-20) {
            candidate = theta + t * direction;
            candidate_objective = objective_at(candidate);
            if (candidate_objective <= objective + sufficient_decrease * t * slope) {
                accepted = true;
                break;
            }
            // Inside the rounding resolution of F, accept a step that shrinks
            // the gradient instead.
            if (std::abs(candidate_objective - objective) <=
                detail::objective_resolution(objective, candidate_objective)) {
                auto [s, g] = nll.value_and_gradient(candidate);
                g += curvature.cwiseProduct(candidate);
                if (std::isfinite(s) && g.allFinite() &&
                    detail::sup_norm(g) < detail::sup_norm(grad)) {
                    accepted = true;
                    break;
                }
            }
            t *= options.line_search_shrink;
        }
        if (!accepted) {
            result.status = FitStatus::stalled;
            break;
        }

        auto [next_smooth, next_grad] = nll.value_and_gradient(candidate);
        if (!std::isfinite(next_smooth) || !next_grad.allFinite()) {
            throw numerical_error{"fit_smooth: non-finite objective at iterate " +
                                  detail::describe_iterate(candidate)};
        }
        theta = std::move(candidate);
        objective = candidate_objective;
        grad = next_grad + curvature.cwiseProduct(theta);
        if (options.record_objective_trace) { result.objective_trace.push_back(objective); }
        if (detail::sup_norm(theta) > drift_cap) {
            result.status = FitStatus::unbounded_drift;
            break;
        }
    }
    if (result.status == FitStatus::max_iterations) {
        result.residual = detail::sup_norm(grad);
        if (result.residual <= options.gradient_tolerance) { result.status = FitStatus::converged; }
    }

    detail::finish(result, data, theta, spec, strengths, stats);
    return result;
}

/// Unpenalized maximum likelihood by damped Newton.
inline auto fit_unpenalized(const Dataset& data, const FitOptions& options = {}) -> FitResult
{
    return fit_smooth(data, PenaltySpec::none(), options);
}

struct KktReport {
    double max_violation = 0.0;
    Vector violations; ///< per flattened coordinate
};

/// Optimality certificate for a penalized fit. For coordinate j with gradient
/// G_j of -l_n and strength lambda_j:
///   nonzero coordinate:  |G_j + d/dc P_j|
///   zero coordinate:     max(0, |G_j| - lambda_j * l1_weight)
inline auto kkt_check(const FitResult& result, const Dataset& data) -> KktReport
{
    auto const& spec = result.spec;
    Vector const grad = -score(result.theta_hat, data);
    auto const theta = result.theta_hat.flat();
    auto const strengths = coordinate_strengths(spec, data.p(), data.q(), data.rows());
    auto const subgrad = penalty_subgradient(spec, result.theta_hat, data.rows());
    auto const l1 = spec.l1_weight();

    KktReport report;
    report.violations.resize(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta[j] != 0.0 || strengths[j] == 0.0) {
            report.violations[j] = std::abs(grad[j] + subgrad[j]);
        }
        else {
            report.violations[j] = std::max(0.0, std::abs(grad[j]) - strengths[j] * l1);
        }
    }
    report.max_violation = detail::sup_norm(report.violations);
    return report;
}

} // namespace zib
