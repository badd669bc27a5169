#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqla/objective.hpp"
#include "pqla/quasi_likelihood.hpp"

namespace pqla {

/// Split of {0..p-1} into the coordinates that are zero (J0) and nonzero (J1)
/// in a reference parameter.
struct SupportPartition {
    std::vector<int> zero_set;
    std::vector<int> nonzero_set;

    static SupportPartition from_theta(const Vector& theta);
    /// All coordinates nonzero.
    static SupportPartition full(int p);

    int dim() const { return static_cast<int>(zero_set.size() + nonzero_set.size()); }
    bool is_zero(int j) const;
    /// Indicator mask over 0..p-1 of the zero set.
    std::vector<bool> zero_mask() const;
    Vector select(const Vector& x, const std::vector<int>& idx) const;
    Matrix block(const Matrix& a, const std::vector<int>& rows, const std::vector<int>& cols) const;
};

enum class PenaltyKind { Bridge, Lasso };

/// Rules for the weights xi_n^j.
enum class WeightRule {
    SampleSizePower,    ///< n^{q'/2}
    RatePowerQPrime,    ///< |alpha_n^j|^{-q'}
    RateInverse,        ///< |alpha_n^j|^{-1}
};

WeightRule parse_weight_rule(std::string_view text);
std::string to_string(WeightRule rule);
PenaltyKind parse_penalty_kind(std::string_view text);
std::string to_string(PenaltyKind kind);

/// p_n(theta) = sum_j xi_n^j |theta_j|^q.
struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::Bridge;
    double q = 0.3;
    double q_prime = 2.0 / 3.0;
    WeightRule weights_rule = WeightRule::SampleSizePower;
    double lambda = 1.0;
    double c0 = 10.0;
    /// Clamp xi to min(xi, c0 / alpha).
    bool cap = false;
    /// Replaces the rule-based weights when set (entries may be zero).
    std::optional<Vector> weight_override;

    /// q = 0.3, q' = 2/3, xi = n^{q'/2}.
    static PenaltySpec bridge_default();
    /// q = 1, xi = |alpha|^{-1}.
    static PenaltySpec lasso();

    void validate() const;
    Vector weights(double n, const RateSpec& rates) const;
    /// Elementwise p(x) = |x|^q.
    double unit(double x) const;
};

double penalty_value(const PenaltySpec& spec, double n, const Vector& theta, const RateSpec& rates);
double penalty_value(const PenaltySpec& spec, double n, const Vector& theta);

/// H(theta) - p_n(theta).
double penalized_objective(const Objective& objective, const PenaltySpec& spec, double n, const Vector& theta,
                           const RateSpec& rates);
double penalized_objective(const Objective& objective, const PenaltySpec& spec, double n, const Vector& theta);

/// Diagonal of A~_n: xi^{-1/q} on J0, alpha on J1.
Vector tilde_rates(const PenaltySpec& spec, const RateSpec& rates, double n, const SupportPartition& support);
/// G_n = a_n^{-1} A~_n (diagonal).
Matrix g_matrix(const PenaltySpec& spec, const RateSpec& rates, double n, const SupportPartition& support);

struct ConditionCheck {
    std::string name;
    std::vector<double> n_grid;
    /// Worst case over the relevant coordinates at each n (empty for
    /// conditions that do not depend on n).
    std::vector<double> sequence;
    /// Power-law exponent of the sequence in n, when it is one.
    std::optional<double> exponent;
    /// Analytic limit as n -> infinity (+inf when divergent).
    std::optional<double> limit;
    bool pass = false;
    std::string detail;
};

struct ConditionReport {
    std::vector<ConditionCheck> checks;
    /// beta_j = lim xi alpha for j in J1 (0 elsewhere).
    Vector beta;
    /// psi_j = beta_j p'(theta*_j) on J1; empty when theta* was not supplied.
    Vector psi;

    const ConditionCheck& get(std::string_view name) const;
    bool passes(std::string_view name) const { return get(name).pass; }
};

/// Check A2-A6 and A11 for the penalty/rate configuration on `n_grid`.
ConditionReport verify_conditions(const PenaltySpec& spec, const RateSpec& rates, std::span<const double> n_grid,
                                  const SupportPartition& support, const Vector* theta_star = nullptr);

}  // namespace pqla
