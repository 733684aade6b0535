#pragma once

#include "zib/likelihood.hpp"
#include "zib/model.hpp"
#include "zib/optimizer.hpp"
#include "zib/penalty.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// \file selection.hpp
///
/// Choice of the regularization strength (BIC, AIC, k-fold cross-validation
/// over a grid) and Wald inference at a fitted solution.

namespace zib {

// =============================== Criteria ================================

/// -2 (l_n - P) + log(n) df, df counting nonzero coefficients in both blocks.
inline auto bic(const FitResult& result, Eigen::Index n) -> double
{
    if (n <= 0) { throw domain_error{"bic: sample size must be positive"}; }
    return -2.0 * result.penalized_log_likelihood() +
           std::log(static_cast<double>(n)) * static_cast<double>(result.degrees_of_freedom());
}

inline auto aic(const FitResult& result) -> double
{
    return -2.0 * result.penalized_log_likelihood() +
           2.0 * static_cast<double>(result.degrees_of_freedom());
}

/// Penalized fit with the solver suited to the penalty: damped Newton when the
/// objective is differentiable, proximal gradient otherwise.
inline auto fit_penalized(const Dataset& data, const PenaltySpec& spec,
                          const FitOptions& options = {}) -> FitResult
{
    return spec.is_smooth() ? fit_smooth(data, spec, options) : fit(data, spec, options);
}

// ============================ Lambda search ==============================

struct LambdaGrid {
    std::vector<double> values;

    static auto default_grid() -> LambdaGrid
    {
        return {{0.0001, 0.001, 0.01, 0.05, 0.09, 0.1, 0.3, 0.5, 10.0, 1000.0}};
    }
};

inline void validate_grid(const LambdaGrid& grid)
{
    if (grid.values.empty()) { throw validation_error{"lambda grid is empty"}; }
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        auto const v = grid.values[i];
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw validation_error{"lambda grid values must be finite and non-negative"};
        }
        if (i > 0 && !(v > grid.values[i - 1])) {
            throw validation_error{"lambda grid must be strictly increasing"};
        }
    }
}

enum class SelectionRule { bic, aic, cv };

inline auto to_string(SelectionRule rule) -> std::string
{
    switch (rule) {
        case SelectionRule::bic: return "bic";
        case SelectionRule::aic: return "aic";
        case SelectionRule::cv: return "cv";
    }
    return "unknown";
}

inline auto parse_selection_rule(std::string_view text) -> SelectionRule
{
    if (text == "bic") { return SelectionRule::bic; }
    if (text == "aic") { return SelectionRule::aic; }
    if (text == "cv") { return SelectionRule::cv; }
    throw validation_error{"unknown selection criterion '" + std::string{text} + "'"};
}

struct PathEntry {
    double lambda = 0.0;
    std::optional<FitResult> fit; ///< absent when the solver raised an error
    std::string error;
    double bic = std::numeric_limits<double>::quiet_NaN();
    double aic = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> cv_loss;

    [[nodiscard]] auto usable() const -> bool { return fit.has_value() && fit->converged; }
};

struct PathResult {
    std::vector<PathEntry> entries; ///< in increasing lambda order
    std::optional<std::size_t> selected;
    SelectionRule rule = SelectionRule::bic;
};

namespace detail {
    inline auto with_lambda(PenaltySpec spec, double lambda) -> PenaltySpec
    {
        spec.lambda_beta = lambda;
        spec.lambda_gamma = lambda;
        return spec;
    }

    inline auto criterion_value(const PathEntry& entry, SelectionRule rule) -> double
    {
        switch (rule) {
            case SelectionRule::bic: return entry.bic;
            case SelectionRule::aic: return entry.aic;
            case SelectionRule::cv:
                return entry.cv_loss ? *entry.cv_loss : std::numeric_limits<double>::quiet_NaN();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    /// Minimizer over usable entries; equal values resolve to the larger lambda.
    inline void select(PathResult& path)
    {
        path.selected.reset();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < path.entries.size(); ++i) {
            auto const& e = path.entries[i];
            if (!e.usable()) { continue; }
            auto const v = criterion_value(e, path.rule);
            if (std::isfinite(v) && v <= best) {
                best = v;
                path.selected = i;
            }
        }
    }

    /// Fits every grid value from the largest down, each warm-started from the
    /// previous solution. Returns entries in increasing lambda order.
    inline auto run_path(const Dataset& data, const PenaltySpec& base, const LambdaGrid& grid,
                         const FitOptions& options) -> std::vector<PathEntry>
    {
        std::vector<PathEntry> entries(grid.values.size());
        std::optional<Parameters> warm = options.initial_theta;
        for (std::size_t k = grid.values.size(); k-- > 0;) {
            auto& entry = entries[k];
            entry.lambda = grid.values[k];
            FitOptions local = options;
            local.initial_theta = warm;
            try {
                entry.fit = fit_penalized(data, with_lambda(base, entry.lambda), local);
                entry.bic = zib::bic(*entry.fit, data.rows());
                entry.aic = zib::aic(*entry.fit);
                if (entry.fit->converged) { warm = entry.fit->theta_hat; }
            }
            catch (const std::exception& ex) {
                entry.error = ex.what();
            }
        }
        return entries;
    }
} // namespace detail

/// Warm-started path over the grid (applied as lambda_beta = lambda_gamma),
/// selected by BIC or AIC.
inline auto lambda_path(const Dataset& data, const PenaltySpec& base, const LambdaGrid& grid,
                        const FitOptions& options = {}, SelectionRule rule = SelectionRule::bic)
    -> PathResult
{
    validate_grid(grid);
    if (rule == SelectionRule::cv) {
        throw validation_error{"lambda_path selects by bic or aic; use cross_validate for cv"};
    }
    PathResult path;
    path.rule = rule;
    path.entries = detail::run_path(data, base, grid, options);
    detail::select(path);
    return path;
}

// =========================== Cross-validation ============================

namespace detail {
    inline auto mix64(std::uint64_t x) noexcept -> std::uint64_t
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    inline auto row_key(const Dataset& data, Eigen::Index i, std::uint64_t seed) -> std::uint64_t
    {
        auto h = mix64(seed);
        auto absorb = [&h](double v) {
            if (v == 0.0) { v = 0.0; } // -0 and +0 hash alike
            h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
        };
        absorb(data.y[i]);
        for (Eigen::Index j = 0; j < data.p(); ++j) { absorb(data.X(i, j)); }
        for (Eigen::Index j = 0; j < data.q(); ++j) { absorb(data.Z(i, j)); }
        return h;
    }

    inline auto row_less(const Dataset& data, Eigen::Index a, Eigen::Index b) -> bool
    {
        auto lex = [](auto const& ra, auto const& rb) {
            return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
        };
        Vector const xa = data.X.row(a), xb = data.X.row(b);
        if (lex(xa, xb)) { return true; }
        if (lex(xb, xa)) { return false; }
        Vector const za = data.Z.row(a), zb = data.Z.row(b);
        return lex(za, zb);
    }
} // namespace detail

/// Fold label per row. Rows are split by response, ordered within each class
/// by a seeded hash of their content, and dealt to folds round-robin. The
/// assignment is therefore deterministic, stratified, and follows a row when
/// the dataset is permuted.
inline auto stratified_folds(const Dataset& data, std::size_t k, std::uint64_t seed)
    -> std::vector<std::size_t>
{
    auto const n = static_cast<std::size_t>(data.rows());
    if (k < 2 || k > n) { throw validation_error{"cross-validation needs 2 <= k <= n"}; }
    std::vector<std::pair<std::uint64_t, Eigen::Index>> keyed;
    keyed.reserve(n);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        keyed.emplace_back(detail::row_key(data, i, seed), i);
    }
    std::sort(keyed.begin(), keyed.end(), [&](auto const& a, auto const& b) {
        auto const ya = data.y[a.second], yb = data.y[b.second];
        if (ya != yb) { return ya < yb; }
        if (a.first != b.first) { return a.first < b.first; }
        return detail::row_less(data, a.second, b.second);
    });
    std::vector<std::size_t> folds(n);
    for (std::size_t r = 0; r < n; ++r) { folds[static_cast<std::size_t>(keyed[r].second)] = r % k; }
    return folds;
}

namespace detail {
    inline auto subset(const Dataset& data, const std::vector<Eigen::Index>& rows) -> Dataset
    {
        auto const m = static_cast<Eigen::Index>(rows.size());
        Dataset out{Vector(m), Matrix(m, data.p()), Matrix(m, data.q())};
        for (Eigen::Index r = 0; r < m; ++r) {
            auto const i = rows[static_cast<std::size_t>(r)];
            out.y[r] = data.y[i];
            out.X.row(r) = data.X.row(i);
            out.Z.row(r) = data.Z.row(i);
        }
        return out;
    }

    inline auto training_has_both_classes(const Dataset& data, const std::vector<std::size_t>& folds,
                                          std::size_t k) -> bool
    {
        for (std::size_t f = 0; f < k; ++f) {
            bool zero = false;
            bool one = false;
            for (std::size_t i = 0; i < folds.size(); ++i) {
                if (folds[i] == f) { continue; }
                (data.y[static_cast<Eigen::Index>(i)] == 1.0 ? one : zero) = true;
            }
            if (!zero || !one) { return false; }
        }
        return true;
    }
} // namespace detail

/// k-fold cross-validation of the mean held-out negative log-likelihood per
/// observation. Every grid value is also fitted on the full data so the
/// result carries the same per-lambda fits and criteria as lambda_path.
inline auto cross_validate(const Dataset& data, const PenaltySpec& base, const LambdaGrid& grid,
                           std::size_t k, std::uint64_t seed, const FitOptions& options = {})
    -> PathResult
{
    validate_grid(grid);
    auto const n = static_cast<std::size_t>(data.rows());
    if (k < 2 || k > n) { throw validation_error{"cross-validation needs 2 <= k <= n"}; }

    // A fold whose complement holds a single response class cannot be fitted
    // meaningfully; re-deal with a derived seed.
    std::vector<std::size_t> folds;
    bool ok = false;
    for (std::uint64_t attempt = 0; attempt < 64 && !ok; ++attempt) {
        folds = stratified_folds(data, k, detail::mix64(seed + attempt * 0x632be59bd9b4e019ULL));
        ok = detail::training_has_both_classes(data, folds, k);
    }
    if (!ok) {
        throw validation_error{"cross-validation: cannot form folds whose training sets contain "
                               "both response classes"};
    }

    PathResult path;
    path.rule = SelectionRule::cv;
    path.entries = detail::run_path(data, base, grid, options);

    std::vector<double> loss(grid.values.size(), 0.0);
    std::vector<bool> failed(grid.values.size(), false);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> held;
        for (std::size_t i = 0; i < n; ++i) {
            (folds[i] == f ? held : train).push_back(static_cast<Eigen::Index>(i));
        }
        auto const train_data = detail::subset(data, train);
        auto const held_data = detail::subset(data, held);
        auto const fold_path = detail::run_path(train_data, base, grid, options);
        for (std::size_t g = 0; g < grid.values.size(); ++g) {
            auto const& e = fold_path[g];
            if (!e.usable()) {
                failed[g] = true;
                continue;
            }
            loss[g] -= log_likelihood(e.fit->theta_hat, held_data);
        }
    }
    for (std::size_t g = 0; g < grid.values.size(); ++g) {
        if (!failed[g]) { path.entries[g].cv_loss = loss[g] / static_cast<double>(n); }
    }
    detail::select(path);
    return path;
}

// ============================ Wald inference =============================

struct StandardErrors {
    std::vector<std::optional<double>> values; ///< per flattened coordinate; absent when zero or not estimable
    bool singular = false; ///< active-set information was not positive definite
};

inline constexpr double eigenvalue_floor = 1e-10;
inline constexpr double null_loading_tolerance = 1e-8;

/// Square roots of the diagonal of the inverse observed information restricted
/// to the nonzero coefficients. When that block is singular or indefinite the
/// pseudo-inverse over eigenvalues above the floor is used and `singular` is
/// set; coordinates involved in the dropped directions get no standard error.
inline auto standard_errors(const FitResult& result) -> StandardErrors
{
    auto const theta = result.theta_hat.flat();
    auto const& info = result.information_at_solution;
    if (info.rows() != theta.size() || info.cols() != theta.size()) {
        throw shape_error{"standard_errors: information matrix missing or mis-sized"};
    }
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta[j] != 0.0) { active.push_back(j); }
    }
    StandardErrors out;
    out.values.assign(static_cast<std::size_t>(theta.size()), std::nullopt);
    if (active.empty()) { return out; }

    auto const m = static_cast<Eigen::Index>(active.size());
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            sub(a, b) = info(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]);
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
    auto const& values = eig.eigenvalues();
    auto const threshold = eigenvalue_floor * std::max(1.0, values.cwiseAbs().maxCoeff());
    Vector inverse_values(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        if (values[a] > threshold) {
            inverse_values[a] = 1.0 / values[a];
        }
        else {
            inverse_values[a] = 0.0;
            out.singular = true;
        }
    }
    Matrix const& vectors = eig.eigenvectors();
    for (Eigen::Index a = 0; a < m; ++a) {
        // A coordinate that loads on a dropped direction is not estimable;
        // the pseudo-inverse would report a misleadingly small variance.
        double null_loading = 0.0;
        for (Eigen::Index b = 0; b < m; ++b) {
            if (inverse_values[b] == 0.0) { null_loading += vectors(a, b) * vectors(a, b); }
        }
        if (null_loading > null_loading_tolerance) { continue; }
        auto const variance = (vectors.row(a).array().square() * inverse_values.transpose().array()).sum();
        out.values[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] =
            std::sqrt(std::max(variance, 0.0));
    }
    return out;
}

/// Quantile function of the standard normal distribution. Rational
/// approximation (relative error about 1e-9) followed by one Halley step on
/// erfc, which brings the error to roughly machine precision.
inline auto inverse_normal_cdf(double p) -> double
{
    if (!(p > 0.0 && p < 1.0)) { throw domain_error{"inverse_normal_cdf: p must lie in (0, 1)"}; }
    // Upper half by symmetry: 1 - p is exact there, and the refinement below
    // is only accurate where the tail probability is not formed by cancellation.
    if (p > 0.5) { return -inverse_normal_cdf(1.0 - p); }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double low = 0.02425;
    double x = 0.0;
    if (p < low) {
        auto const r = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    else if (p <= 1.0 - low) {
        auto const s = p - 0.5;
        auto const r = s * s;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    else {
        auto const r = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    constexpr double sqrt_2pi = 2.50662827463100050242;
    auto const e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    auto const u = e * sqrt_2pi * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    [[nodiscard]] auto length() const noexcept -> double { return upper - lower; }
    [[nodiscard]] auto contains(double v) const noexcept -> bool { return lower <= v && v <= upper; }
};

inline auto wald_intervals(const Vector& theta, const StandardErrors& se, double level)
    -> std::vector<std::optional<Interval>>
{
    if (!(level > 0.0 && level < 1.0)) { throw domain_error{"wald_intervals: level must lie in (0, 1)"}; }
    auto const z = inverse_normal_cdf((1.0 + level) / 2.0);
    std::vector<std::optional<Interval>> out(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        auto const& s = se.values[static_cast<std::size_t>(j)];
        if (!s) { continue; }
        auto const half = z * *s;
        out[static_cast<std::size_t>(j)] = Interval{theta[j] - half, theta[j] + half};
    }
    return out;
}

/// theta_hat_j +- z_{(1+level)/2} SE_j for every coordinate with a standard error.
inline auto wald_intervals(const FitResult& result, double level)
    -> std::vector<std::optional<Interval>>
{
    return wald_intervals(result.theta_hat.flat(), standard_errors(result), level);
}

} // namespace zib
