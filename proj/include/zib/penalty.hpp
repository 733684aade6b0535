#pragma once

#include "zib/likelihood.hpp"
#include "zib/model.hpp"

#include <cmath>
#include <string>
#include <string_view>

/// \file penalty.hpp
///
/// LASSO, ridge and elastic-net penalties on theta = (beta, gamma).
///
/// Per block (beta or gamma) with strength lambda_block and mixing weight a,
///
///   lasso        lambda * sum |c|
///   ridge        lambda * sum c^2
///   elastic net  lambda * [a * sum |c| + (1 - a) / 2 * sum c^2]
///
/// Each family is the general form lambda * [a |c| + k c^2] with
/// (a, k) = (1, 0), (0, 1) and (a, (1 - a) / 2) respectively. The estimator
/// minimizes F(theta) = -l_n(theta) + P(theta).

namespace zib {

enum class PenaltyFamily { lasso, ridge, elastic_net };

inline auto to_string(PenaltyFamily family) -> std::string
{
    switch (family) {
        case PenaltyFamily::lasso: return "lasso";
        case PenaltyFamily::ridge: return "ridge";
        case PenaltyFamily::elastic_net: return "elastic_net";
    }
    return "unknown";
}

inline auto parse_penalty_family(std::string_view text) -> PenaltyFamily
{
    if (text == "lasso") { return PenaltyFamily::lasso; }
    if (text == "ridge") { return PenaltyFamily::ridge; }
    if (text == "elastic_net" || text == "enet" || text == "elastic-net") {
        return PenaltyFamily::elastic_net;
    }
    throw validation_error{"unknown penalty family '" + std::string{text} + "'"};
}

struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::ridge;
    double lambda_beta = 0.0;
    double lambda_gamma = 0.0;
    double alpha = 0.5; ///< elastic-net mixing; ignored by lasso and ridge
    bool penalize_intercepts = true;
    bool scale_by_n = false;

    static auto none() -> PenaltySpec { return {}; }

    static auto make(PenaltyFamily family, double lambda, double alpha = 0.5) -> PenaltySpec
    {
        PenaltySpec spec;
        spec.family = family;
        spec.lambda_beta = lambda;
        spec.lambda_gamma = lambda;
        spec.alpha = alpha;
        return spec;
    }

    /// Weight of the |c| term.
    [[nodiscard]] auto l1_weight() const noexcept -> double
    {
        switch (family) {
            case PenaltyFamily::lasso: return 1.0;
            case PenaltyFamily::ridge: return 0.0;
            case PenaltyFamily::elastic_net: return alpha;
        }
        return 0.0;
    }

    /// Weight of the c^2 term.
    [[nodiscard]] auto l2_weight() const noexcept -> double
    {
        switch (family) {
            case PenaltyFamily::lasso: return 0.0;
            case PenaltyFamily::ridge: return 1.0;
            case PenaltyFamily::elastic_net: return (1.0 - alpha) / 2.0;
        }
        return 0.0;
    }

    [[nodiscard]] auto is_zero() const noexcept -> bool
    {
        return lambda_beta == 0.0 && lambda_gamma == 0.0;
    }

    [[nodiscard]] auto is_smooth() const noexcept -> bool
    {
        return is_zero() || l1_weight() == 0.0;
    }

    friend auto operator==(const PenaltySpec&, const PenaltySpec&) -> bool = default;
};

inline void validate_penalty(const PenaltySpec& spec)
{
    if (!(spec.lambda_beta >= 0.0) || !(spec.lambda_gamma >= 0.0) ||
        !std::isfinite(spec.lambda_beta) || !std::isfinite(spec.lambda_gamma)) {
        throw validation_error{"penalty strengths must be finite and non-negative"};
    }
    if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
        throw validation_error{"elastic-net mixing weight must lie in [0, 1]"};
    }
}

/// Effective per-coordinate strength of the flattened theta: lambda of its
/// block, times n when scaling is enabled, and zero on exempt intercepts.
inline auto coordinate_strengths(const PenaltySpec& spec, Eigen::Index p, Eigen::Index q,
                                 Eigen::Index n_obs) -> Vector
{
    auto const scale = spec.scale_by_n ? static_cast<double>(n_obs) : 1.0;
    Vector out(p + q);
    out.head(p).setConstant(spec.lambda_beta * scale);
    out.tail(q).setConstant(spec.lambda_gamma * scale);
    if (!spec.penalize_intercepts) {
        if (p > 0) { out[0] = 0.0; }
        if (q > 0) { out[p] = 0.0; }
    }
    return out;
}

/// `n_obs` only matters when spec.scale_by_n is set.
inline auto penalty_value(const PenaltySpec& spec, const Parameters& theta,
                          Eigen::Index n_obs = 1) -> double
{
    auto const strengths = coordinate_strengths(spec, theta.beta.size(), theta.gamma.size(), n_obs);
    auto const coef = theta.flat();
    auto const a = spec.l1_weight();
    auto const k = spec.l2_weight();
    double total = 0.0;
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        if (strengths[j] == 0.0) { continue; }
        total += strengths[j] * (a * std::abs(coef[j]) + k * coef[j] * coef[j]);
    }
    return total;
}

/// Elementwise subgradient, choosing 0 from [-1, 1] for the L1 part at a zero
/// coordinate. Used for optimality checks only.
inline auto penalty_subgradient(const PenaltySpec& spec, const Parameters& theta,
                                Eigen::Index n_obs = 1) -> Vector
{
    auto const strengths = coordinate_strengths(spec, theta.beta.size(), theta.gamma.size(), n_obs);
    auto const coef = theta.flat();
    auto const a = spec.l1_weight();
    auto const k = spec.l2_weight();
    Vector out(coef.size());
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        auto const sign = coef[j] > 0.0 ? 1.0 : (coef[j] < 0.0 ? -1.0 : 0.0);
        out[j] = strengths[j] * (a * sign + 2.0 * k * coef[j]);
    }
    return out;
}

namespace detail {
    /// argmin_u 1/2 (u - v)^2 + t1 |u| + t2 u^2
    ///   = sign(v) max(|v| - t1, 0) / (1 + 2 t2)
    inline auto scalar_prox(double v, double t1, double t2) noexcept -> double
    {
        auto const magnitude = std::abs(v) - t1;
        if (magnitude <= 0.0) { return 0.0; }
        return std::copysign(magnitude, v) / (1.0 + 2.0 * t2);
    }

    inline auto prox_flat(const Vector& strengths, double l1, double l2, const Vector& v,
                          double step) -> Vector
    {
        Vector out(v.size());
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (strengths[j] == 0.0) {
                out[j] = v[j];
                continue;
            }
            out[j] = scalar_prox(v[j], step * strengths[j] * l1, step * strengths[j] * l2);
        }
        return out;
    }
} // namespace detail

/// prox of step * P evaluated at theta.
inline auto proximal_step(const PenaltySpec& spec, const Parameters& theta, double step,
                          Eigen::Index n_obs = 1) -> Parameters
{
    if (!(step > 0.0)) { throw domain_error{"proximal_step: step must be positive"}; }
    auto const p = theta.beta.size();
    auto const strengths = coordinate_strengths(spec, p, theta.gamma.size(), n_obs);
    return Parameters::from_flat(
        detail::prox_flat(strengths, spec.l1_weight(), spec.l2_weight(), theta.flat(), step), p);
}

/// F(theta) = -l_n(theta) + P(theta).
inline auto penalized_objective(const PenaltySpec& spec, const Parameters& theta,
                                const Dataset& data) -> double
{
    return -log_likelihood(theta, data) + penalty_value(spec, theta, data.rows());
}

} // namespace zib
