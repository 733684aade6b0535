#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// \file model.hpp
///
/// Zero-inflated Bernoulli probability model: logit links, mixture
/// probabilities and dataset validation.
///
/// An observation is a structural zero with probability pi = logistic(gamma'z);
/// otherwise it is Bernoulli(p) with p = logistic(beta'x).

namespace zib {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ============================== Errors ===================================

class shape_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class domain_error : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

class validation_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an optimizer meets a non-finite objective.
class numerical_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// =========================== Domain types ================================

/// Binary responses with the event design X (n x p) and the zero-inflation
/// design Z (n x q). Column 0 of both designs is the intercept.
struct Dataset {
    Vector y;
    Matrix X;
    Matrix Z;

    [[nodiscard]] auto rows() const noexcept -> Eigen::Index { return y.size(); }
    [[nodiscard]] auto p() const noexcept -> Eigen::Index { return X.cols(); }
    [[nodiscard]] auto q() const noexcept -> Eigen::Index { return Z.cols(); }
};

/// theta = (beta, gamma). Optimizers work on the flattened vector.
struct Parameters {
    Vector beta;
    Vector gamma;

    Parameters() = default;
    Parameters(Vector b, Vector g) : beta{std::move(b)}, gamma{std::move(g)} {}

    static auto zeros(Eigen::Index p, Eigen::Index q) -> Parameters
    {
        return {Vector::Zero(p), Vector::Zero(q)};
    }

    static auto from_flat(const Vector& theta, Eigen::Index p) -> Parameters
    {
        if (p < 0 || p > theta.size()) {
            throw shape_error{"Parameters::from_flat: block size exceeds vector length"};
        }
        return {theta.head(p), theta.tail(theta.size() - p)};
    }

    [[nodiscard]] auto dim() const noexcept -> Eigen::Index { return beta.size() + gamma.size(); }

    [[nodiscard]] auto flat() const -> Vector
    {
        Vector out(dim());
        out << beta, gamma;
        return out;
    }

    [[nodiscard]] auto all_finite() const -> bool
    {
        return beta.allFinite() && gamma.allFinite();
    }

    friend auto operator==(const Parameters& a, const Parameters& b) -> bool
    {
        return a.beta.size() == b.beta.size() && a.gamma.size() == b.gamma.size() &&
               a.beta == b.beta && a.gamma == b.gamma;
    }
};

struct MixtureProbabilities {
    double p;      ///< event probability of a susceptible subject
    double pi;     ///< zero-inflation (structural zero) probability
    double p_zero; ///< P(Y = 0)
    double p_one;  ///< P(Y = 1)
};

// ============================ Scalar links ===============================

/// log(1 + e^u) without overflow.
inline auto log1p_exp(double u) noexcept -> double
{
    return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

/// e^u / (1 + e^u) evaluated in the branch that cannot overflow. The result is
/// clamped to the open interval (0, 1) so saturated arguments never produce an
/// exact 0 or 1.
inline auto logistic(double u) -> double
{
    if (!std::isfinite(u)) { throw domain_error{"logistic: non-finite argument"}; }
    constexpr double lowest = std::numeric_limits<double>::denorm_min();
    constexpr double highest = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double value = 0.0;
    if (u >= 0.0) {
        value = 1.0 / (1.0 + std::exp(-u));
    }
    else {
        auto const e = std::exp(u);
        value = e / (1.0 + e);
    }
    return std::clamp(value, lowest, highest);
}

namespace detail {
    inline auto dot_checked(const Vector& coef, const Eigen::Ref<const Vector>& row,
                            const char* what) -> double
    {
        if (coef.size() != row.size()) {
            std::ostringstream msg;
            msg << what << ": coefficient length " << coef.size() << " != row length "
                << row.size();
            throw shape_error{msg.str()};
        }
        return coef.dot(row);
    }

    /// Probabilities for linear predictors eta = beta'x and zeta = gamma'z.
    /// P(Y=0) is formed as pi + (1-pi)(1-p) with 1-p = logistic(-eta) so that
    /// no cancellation occurs when p is close to 1.
    inline auto mixture_from_predictors(double eta, double zeta) -> MixtureProbabilities
    {
        auto const p = logistic(eta);
        auto const q = logistic(-eta);
        auto const pi = logistic(zeta);
        auto const one_minus_pi = logistic(-zeta);
        auto const p_one = one_minus_pi * p;
        auto const p_zero = pi + one_minus_pi * q;
        return {p, pi, p_zero, p_one};
    }
} // namespace detail

inline auto event_probability(const Vector& beta, const Eigen::Ref<const Vector>& x) -> double
{
    return logistic(detail::dot_checked(beta, x, "event_probability"));
}

inline auto zero_inflation_probability(const Vector& gamma, const Eigen::Ref<const Vector>& z)
    -> double
{
    return logistic(detail::dot_checked(gamma, z, "zero_inflation_probability"));
}

inline auto mixture_probabilities(const Parameters& theta, const Eigen::Ref<const Vector>& x,
                                  const Eigen::Ref<const Vector>& z) -> MixtureProbabilities
{
    auto const eta = detail::dot_checked(theta.beta, x, "mixture_probabilities");
    auto const zeta = detail::dot_checked(theta.gamma, z, "mixture_probabilities");
    return detail::mixture_from_predictors(eta, zeta);
}

/// P(Y = y | x, z, theta).
inline auto mixture_pmf(const Parameters& theta, const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& z, int y) -> double
{
    if (y != 0 && y != 1) { throw domain_error{"mixture_pmf: response must be 0 or 1"}; }
    auto const m = mixture_probabilities(theta, x, z);
    return y == 1 ? m.p_one : m.p_zero;
}

// =========================== Validation ==================================

inline void check_dimensions(const Parameters& theta, const Dataset& data)
{
    if (theta.beta.size() != data.p() || theta.gamma.size() != data.q()) {
        std::ostringstream msg;
        msg << "parameter dimensions (" << theta.beta.size() << ", " << theta.gamma.size()
            << ") do not match design dimensions (" << data.p() << ", " << data.q() << ")";
        throw shape_error{msg.str()};
    }
}

/// Returns the dataset unchanged if it satisfies every invariant; otherwise
/// throws validation_error listing the offending rows and columns (1-based).
inline auto validate_dataset(Dataset raw) -> Dataset
{
    std::vector<std::string> problems;
    auto const n = raw.y.size();

    if (n == 0) { problems.emplace_back("dataset has zero rows"); }
    if (raw.X.rows() != n) {
        problems.emplace_back("X has " + std::to_string(raw.X.rows()) + " rows, expected " +
                              std::to_string(n));
    }
    if (raw.Z.rows() != n) {
        problems.emplace_back("Z has " + std::to_string(raw.Z.rows()) + " rows, expected " +
                              std::to_string(n));
    }
    if (raw.X.cols() == 0) { problems.emplace_back("X has no columns"); }
    if (raw.Z.cols() == 0) { problems.emplace_back("Z has no columns"); }

    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(raw.y[i] == 0.0 || raw.y[i] == 1.0)) {
            std::ostringstream msg;
            msg << "row " << i + 1 << ": response " << raw.y[i] << " is not 0 or 1";
            problems.push_back(msg.str());
        }
    }

    auto check_design = [&](const Matrix& m, const char* name) {
        if (m.rows() != n || m.cols() == 0) { return; }
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isfinite(m(i, j))) {
                    problems.push_back(std::string{name} + " row " + std::to_string(i + 1) +
                                       ", column " + std::to_string(j + 1) + ": non-finite value");
                }
            }
        }
        if ((m.col(0).array() != 1.0).any()) {
            problems.push_back(std::string{name} + " column 1 is not an all-ones intercept column");
        }
    };
    check_design(raw.X, "X");
    check_design(raw.Z, "Z");

    if (!problems.empty()) {
        std::string text = "invalid dataset:";
        for (auto const& p : problems) { text += "\n  " + p; }
        throw validation_error{text};
    }
    return raw;
}

} // namespace zib
