#pragma once

// Shared fixtures and independent reference computations for the test suite.
// The oracles here deliberately avoid the library's own kernels.

#include "zib/model.hpp"
#include "zib/simulation.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace zib::fixtures {

/// Intercept plus standard normal columns; y drawn from the ZIB model at theta.
inline auto random_dataset(Eigen::Index n, Eigen::Index p, Eigen::Index q, std::mt19937_64& rng,
                           const Parameters* theta = nullptr) -> Dataset
{
    std::normal_distribution<double> normal{0.0, 1.0};
    std::uniform_real_distribution<double> unit{0.0, 1.0};
    Dataset d{Vector(n), Matrix(n, p), Matrix(n, q)};
    for (Eigen::Index i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.Z(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < p; ++j) { d.X(i, j) = normal(rng); }
        for (Eigen::Index j = 1; j < q; ++j) { d.Z(i, j) = normal(rng); }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (theta) {
            auto const pr = 1.0 / (1.0 + std::exp(-d.X.row(i).dot(theta->beta)));
            auto const pi = 1.0 / (1.0 + std::exp(-d.Z.row(i).dot(theta->gamma)));
            d.y[i] = (unit(rng) >= pi && unit(rng) < pr) ? 1.0 : 0.0;
        }
        else {
            d.y[i] = unit(rng) < 0.4 ? 1.0 : 0.0;
        }
    }
    return d;
}

inline auto random_parameters(Eigen::Index p, Eigen::Index q, std::mt19937_64& rng,
                              double scale = 0.5) -> Parameters
{
    std::normal_distribution<double> normal{0.0, scale};
    Parameters t = Parameters::zeros(p, q);
    for (Eigen::Index j = 0; j < p; ++j) { t.beta[j] = normal(rng); }
    for (Eigen::Index j = 0; j < q; ++j) { t.gamma[j] = normal(rng); }
    return t;
}

/// Per-observation mixture pmf written out directly in long double.
inline auto reference_pmf(const Parameters& theta, const Vector& x, const Vector& z, double y)
    -> long double
{
    long double eta = 0.0L;
    long double zeta = 0.0L;
    for (Eigen::Index j = 0; j < x.size(); ++j) { eta += static_cast<long double>(theta.beta[j]) * x[j]; }
    for (Eigen::Index j = 0; j < z.size(); ++j) { zeta += static_cast<long double>(theta.gamma[j]) * z[j]; }
    auto const p = 1.0L / (1.0L + std::exp(-eta));
    auto const pi = 1.0L / (1.0L + std::exp(-zeta));
    return y == 1.0 ? (1.0L - pi) * p : pi + (1.0L - pi) * (1.0L - p);
}

inline auto reference_log_likelihood(const Parameters& theta, const Dataset& d) -> double
{
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        total += std::log(reference_pmf(theta, d.X.row(i).transpose(), d.Z.row(i).transpose(), d.y[i]));
    }
    return static_cast<double>(total);
}

/// Central differences of a vector-valued map: column j approximates d f / d x_j.
inline auto jacobian_by_differences(const std::function<Vector(const Vector&)>& f, const Vector& x)
    -> Matrix
{
    auto const f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        auto const h = 1e-5 * (1.0 + std::abs(x[j]));
        Vector up = x;
        Vector down = x;
        up[j] += h;
        down[j] -= h;
        J.col(j) = (f(up) - f(down)) / (2.0 * h);
    }
    return J;
}

/// max_j |a_j - b_j| / max(1, |b_j|)
inline auto max_relative_error(const Matrix& a, const Matrix& b) -> double
{
    return ((a - b).array().abs() / b.array().abs().max(1.0)).maxCoeff();
}

inline auto scenario_data(int scenario, Eigen::Index n, std::uint64_t seed, std::uint64_t index = 0)
    -> Dataset
{
    auto rng = replicate_rng(seed, index);
    return simulate_dataset(builtin_scenario(scenario), n, rng);
}

/// The fixed scenario-1 dataset (n = 500) used for path-shape checks.
inline auto acceptance_dataset() -> Dataset { return scenario_data(1, 500, 2024, 0); }

/// argmin_u 1/2 (u - v)^2 + step * lambda * (a |u| + k u^2) by a dense grid
/// followed by golden-section refinement around the best grid point.
inline auto grid_prox(double v, double step, double lambda, double a, double k) -> double
{
    auto const f = [&](double u) {
        return 0.5 * (u - v) * (u - v) + step * lambda * (a * std::abs(u) + k * u * u);
    };
    auto const radius = std::abs(v) + 1.0;
    constexpr int points = 4001;
    auto const spacing = 2.0 * radius / (points - 1);
    double best = -radius;
    for (int i = 0; i < points; ++i) {
        auto const u = -radius + spacing * i;
        if (f(u) < f(best)) { best = u; }
    }
    double lo = best - spacing;
    double hi = best + spacing;
    constexpr double ratio = 0.6180339887498949;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        auto const m1 = hi - ratio * (hi - lo);
        auto const m2 = lo + ratio * (hi - lo);
        if (f(m1) <= f(m2)) { hi = m2; }
        else { lo = m1; }
    }
    auto const u = 0.5 * (lo + hi);
    return f(0.0) <= f(u) ? 0.0 : u; // the kink at 0 is a common minimizer
}

} // namespace zib::fixtures
