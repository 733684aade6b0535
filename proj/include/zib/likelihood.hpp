#pragma once

#include "zib/model.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

/// \file likelihood.hpp
///
/// Log-likelihood, score and observed information of the ZIB model.
///
/// Derivation. Write eta = beta'x, zeta = gamma'z, p = logistic(eta),
/// q = 1 - p, pi = logistic(zeta), P1 = (1 - pi) p and P0 = 1 - P1.
///
///   y = 1:  l = -log(1 + e^-eta) - log(1 + e^zeta)
///           dl/deta = q,  dl/dzeta = -pi
///           -d2l/deta2 = p q,  -d2l/dzeta2 = pi (1 - pi),  cross = 0
///
///   y = 0:  l = log P0,  with dP1/deta = P1 q and dP1/dzeta = -P1 pi.
///           Let r = P1 / P0.
///           dl/deta  = -r q
///           dl/dzeta =  r pi
///           -d2l/deta2     = r q (q - p) + r^2 q^2
///           -d2l/dzeta2    = r pi (pi - (1 - pi)) + r^2 pi^2
///           -d2l/detadzeta = -r (1 + r) pi q
///
/// The chain rule through eta = x'beta and zeta = z'gamma gives
///   score = W g          with W = [X' 0; 0 Z'] and g = (dl/deta_i, dl/dzeta_i)
///   information = W D W' with D = [D1 D0; D0 D2] built from the per-observation
///                                 weights above (all diagonal n x n blocks).

namespace zib {

/// Counters collected while evaluating likelihood quantities.
struct EvalStats {
    /// Number of observations whose P(Y=0) fell below the 1e-300 floor.
    std::size_t floor_hits = 0;
};

inline constexpr double probability_floor = 1e-300;

/// Diagonals of the information weight blocks D1 (beta, beta), D2 (gamma, gamma)
/// and D0 (beta, gamma), one entry per observation.
struct InformationWeights {
    Vector d1;
    Vector d2;
    Vector d0;
};

namespace detail {
    struct ObservationTerms {
        double loglik;
        double grad_eta;
        double grad_zeta;
        double w_eta_eta;
        double w_zeta_zeta;
        double w_eta_zeta;
    };

    /// log(e^a + e^b)
    inline auto log_add_exp(double a, double b) noexcept -> double
    {
        auto const hi = a > b ? a : b;
        auto const lo = a > b ? b : a;
        return hi + std::log1p(std::exp(lo - hi));
    }

    /// logistic(u), 1 - logistic(u) and their logs from a single exponential.
    struct LinkValues {
        double prob;
        double complement;
        double log_prob;
        double log_complement;
    };

    inline auto link_values(double u) noexcept -> LinkValues
    {
        auto const e = std::exp(-std::abs(u));
        auto const denom = 1.0 + e;
        auto const log_denom = std::log1p(e);
        if (u >= 0.0) { return {1.0 / denom, e / denom, -log_denom, -u - log_denom}; }
        return {e / denom, 1.0 / denom, u - log_denom, -log_denom};
    }

    inline auto observation_terms(double eta, double zeta, bool is_one, EvalStats* stats)
        -> ObservationTerms
    {
        if (!std::isfinite(eta) || !std::isfinite(zeta)) {
            throw domain_error{"likelihood: non-finite linear predictor"};
        }
        auto const ev = link_values(eta);
        auto const in = link_values(zeta);
        auto const p = ev.prob;
        auto const q = ev.complement;
        auto const pi = in.prob;
        auto const omega = in.complement;
        if (is_one) {
            return {ev.log_prob + in.log_complement, q, -pi, p * q, pi * omega, 0.0};
        }
        // P0 = pi + (1 - pi)(1 - p) is a sum of non-negative terms, so its log
        // is accurate unless it underflows; then use
        // log P0 = log(e^zeta + 1/(1+e^eta)) - log(1+e^zeta).
        auto p0 = pi + omega * q;
        auto const log_p0 = p0 > probability_floor
                                ? std::log(p0)
                                : log_add_exp(in.log_prob, in.log_complement + ev.log_complement);
        if (p0 < probability_floor) {
            p0 = probability_floor;
            if (stats != nullptr) { ++stats->floor_hits; }
        }
        auto const r = omega * p / p0;
        return {log_p0,
                -r * q,
                r * pi,
                r * q * (q - p) + r * r * q * q,
                r * pi * (pi - omega) + r * r * pi * pi,
                -r * (1.0 + r) * pi * q};
    }
} // namespace detail

inline auto log_likelihood(const Parameters& theta, const Dataset& data,
                           EvalStats* stats = nullptr) -> double
{
    check_dimensions(theta, data);
    Vector const eta = data.X * theta.beta;
    Vector const zeta = data.Z * theta.gamma;
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        total += detail::observation_terms(eta[i], zeta[i], data.y[i] == 1.0, stats).loglik;
    }
    return total;
}

/// Gradient of the log-likelihood, beta block then gamma block.
inline auto score(const Parameters& theta, const Dataset& data, EvalStats* stats = nullptr)
    -> Vector
{
    check_dimensions(theta, data);
    auto const n = data.rows();
    Vector const eta = data.X * theta.beta;
    Vector const zeta = data.Z * theta.gamma;
    Vector g_eta(n);
    Vector g_zeta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const t = detail::observation_terms(eta[i], zeta[i], data.y[i] == 1.0, stats);
        g_eta[i] = t.grad_eta;
        g_zeta[i] = t.grad_zeta;
    }
    Vector out(data.p() + data.q());
    out.head(data.p()).noalias() = data.X.transpose() * g_eta;
    out.tail(data.q()).noalias() = data.Z.transpose() * g_zeta;
    return out;
}

/// Objective value and gradient in one pass over the data.
inline auto log_likelihood_and_score(const Parameters& theta, const Dataset& data,
                                     EvalStats* stats = nullptr) -> std::pair<double, Vector>
{
    check_dimensions(theta, data);
    auto const n = data.rows();
    Vector const eta = data.X * theta.beta;
    Vector const zeta = data.Z * theta.gamma;
    Vector g_eta(n);
    Vector g_zeta(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const t = detail::observation_terms(eta[i], zeta[i], data.y[i] == 1.0, stats);
        total += t.loglik;
        g_eta[i] = t.grad_eta;
        g_zeta[i] = t.grad_zeta;
    }
    Vector grad(data.p() + data.q());
    grad.head(data.p()).noalias() = data.X.transpose() * g_eta;
    grad.tail(data.q()).noalias() = data.Z.transpose() * g_zeta;
    return {total, std::move(grad)};
}

inline auto information_weights(const Parameters& theta, const Dataset& data,
                                EvalStats* stats = nullptr) -> InformationWeights
{
    check_dimensions(theta, data);
    auto const n = data.rows();
    Vector const eta = data.X * theta.beta;
    Vector const zeta = data.Z * theta.gamma;
    InformationWeights w{Vector(n), Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const t = detail::observation_terms(eta[i], zeta[i], data.y[i] == 1.0, stats);
        w.d1[i] = t.w_eta_eta;
        w.d2[i] = t.w_zeta_zeta;
        w.d0[i] = t.w_eta_zeta;
    }
    return w;
}

/// Negative Hessian of the log-likelihood, assembled blockwise as W D W'.
/// The lower triangle is mirrored from the upper one, so the result is exactly
/// symmetric.
inline auto observed_information(const Parameters& theta, const Dataset& data,
                                 EvalStats* stats = nullptr) -> Matrix
{
    auto const w = information_weights(theta, data, stats);
    auto const p = data.p();
    auto const q = data.q();
    Matrix info(p + q, p + q);
    info.topLeftCorner(p, p).noalias() = data.X.transpose() * w.d1.asDiagonal() * data.X;
    info.topRightCorner(p, q).noalias() = data.X.transpose() * w.d0.asDiagonal() * data.Z;
    info.bottomRightCorner(q, q).noalias() = data.Z.transpose() * w.d2.asDiagonal() * data.Z;
    return info.selfadjointView<Eigen::Upper>();
}

/// Central differences of an arbitrary scalar function; `step(j, x_j)` yields
/// the half-width used for coordinate j.
template <typename Function, typename StepRule>
auto central_difference_gradient(Function&& f, const Vector& x, StepRule&& step) -> Vector
{
    Vector grad(x.size());
    Vector probe = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        auto const h = step(j, x[j]);
        probe[j] = x[j] + h;
        auto const up = f(probe);
        probe[j] = x[j] - h;
        auto const down = f(probe);
        probe[j] = x[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// (l(theta + h e_j) - l(theta - h e_j)) / 2h for every coordinate.
inline auto finite_difference_gradient(const Parameters& theta, const Dataset& data, double h)
    -> Vector
{
    if (!(h > 0.0)) { throw domain_error{"finite_difference_gradient: step must be positive"}; }
    check_dimensions(theta, data);
    auto const p = data.p();
    return central_difference_gradient(
        [&](const Vector& x) { return log_likelihood(Parameters::from_flat(x, p), data); },
        theta.flat(), [h](Eigen::Index, double) { return h; });
}

} // namespace zib
