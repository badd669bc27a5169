#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "pqla/objective.hpp"
#include "pqla/sde_core.hpp"

namespace pqla {

/**
 * Gaussian quasi log-likelihood of the volatility parameter,
 *
 *   H_n(theta) = -1/2 sum_j { log S(X_{t_{j-1}}, theta) + S^{-1}(X_{t_{j-1}}, theta) (Delta_j Y)^2 / h },
 *
 * for a scalar observed process. Derivatives are exact whenever the
 * volatility family provides closed-form derivatives of log S.
 */
class QuasiLikelihood final : public Objective {
public:
    QuasiLikelihood(const Dataset& ds, const ModelSpec& spec);

    int dim() const override { return p_; }
    Evaluation evaluate(const Vector& theta, Order order) const override;
    bool depends_on_theta() const override { return volatility_->depends_on_theta(); }

    int sample_size() const noexcept { return n_; }

private:
    int p_;
    int n_;
    std::shared_ptr<const VolatilityFamily> volatility_;
    RowMatrix x_;         // n x d, left endpoints
    Vector scaled_sq_;    // (Delta_j Y)^2 / h
    bool linear_ = false; // log S = features * theta at every observation
    Matrix features_;     // n x p when linear_
};

double quasi_loglik(const Dataset& ds, const ModelSpec& spec, const Vector& theta);
Vector quasi_score(const Dataset& ds, const ModelSpec& spec, const Vector& theta);
Matrix quasi_hessian(const Dataset& ds, const ModelSpec& spec, const Vector& theta);

/// Per-coordinate rates alpha_n^j = coefficient_j * n^(-exponent_j); a_n is
/// the diagonal matrix of these.
struct RateSpec {
    Vector coefficient;
    Vector exponent;

    /// alpha_n^j = n^{-1/2} for every coordinate.
    static RateSpec standard(int p);

    int dim() const { return static_cast<int>(coefficient.size()); }
    Vector alpha(double n) const;
    Matrix a(double n) const { return alpha(n).asDiagonal(); }
    void validate() const;
};

/// H_n(theta* + a u) - H_n(theta*) = Delta' u - 1/2 u' Gamma u + r(u).
struct LaqDecomposition {
    Vector theta_star;
    Matrix a;
    Vector delta;
    Matrix gamma;  ///< -a Hess H_n(theta*) a
    /// Quadratic form used in the remainder: the supplied limit matrix, or
    /// `gamma` when none was given.
    Matrix reference_gamma;
    /// r(u). Holds a reference to the objective passed to laq_decompose.
    std::function<double(const Vector&)> remainder;
};

/// `limit_gamma`, when non-null, replaces gamma in the remainder.
LaqDecomposition laq_decompose(const Objective& objective, const Vector& theta_star, const RateSpec& rates,
                               double n, const Matrix* limit_gamma = nullptr);

struct LimitInformation {
    Matrix gamma;
    /// Smallest eigenvalue below 1e-10 times the largest.
    bool degenerate = false;
};

/// Left-endpoint Riemann sum of
/// Gamma(theta*) = 1/(2T) int Tr((d S) S^{-1} (d S) S^{-1}) dt on the fine grid.
LimitInformation limit_information(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star);

/// Y(theta) = -1/(2T) int { log(S(theta)/S(theta*)) + S(theta*)/S(theta) - 1 } dt.
double limit_contrast(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star,
                      const Vector& theta);

/// Estimate of chi_0 = inf_{theta != theta*} -Y(theta)/|theta - theta*|^2 over
/// the closed box: `budget` uniform random starts, each refined by
/// coordinate-wise golden-section search, plus the local limit
/// lambda_min(Gamma(theta*))/2 approached as theta -> theta*.
double chi0_estimate(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star, int budget,
                     std::uint64_t seed = 0);

}  // namespace pqla
