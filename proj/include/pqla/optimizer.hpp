#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqla/objective.hpp"
#include "pqla/penalties.hpp"

namespace pqla {

enum class Method { Qmle, Penalized, Qbe };

std::string to_string(Method method);
/// Accepts "qmle", "pql"/"penalized", "qbe".
Method parse_method(std::string_view text);

struct McmcDiagnostics {
    double acceptance_rate = 0.0;  ///< after adaptation
    double min_ess = 0.0;
    Vector ess;
    Vector posterior_sd;
    Vector mc_stderr;  ///< posterior_sd / sqrt(ess)
    bool passed = false;
};

struct EstimationResult {
    Method method = Method::Qmle;
    Vector theta_hat;
    Vector theta_init;
    /// Indices j with theta_hat[j] != 0.
    std::vector<int> active_set;
    int iterations = 0;
    double grad_norm = 0.0;
    double objective = 0.0;
    double wall_seconds = 0.0;
    bool converged = false;
    std::optional<McmcDiagnostics> mcmc;
};

struct NewtonOptions {
    int max_iterations = 200;
    /// Stationarity: |grad|_inf <= tolerance * (1 + |H|) on free coordinates.
    double gradient_tolerance = 1e-8;
    double armijo = 1e-4;
    double step_floor = 1e-12;
    double ridge_start = 1e-8;
};

struct LqaOptions {
    int max_iterations = 500;
    /// Coordinates with |theta_j| below this are set to exactly zero.
    double deletion_threshold = 1e-4;
    double step_tolerance = 1e-8;
    double gradient_tolerance = 1e-8;
    /// Exact-Hessian Newton steps on the active set after the LQA loop.
    int polish_iterations = 50;
    double step_floor = 1e-12;
    double ridge_start = 1e-8;
    /// Coordinates held at zero throughout (empty: none).
    std::vector<bool> clamp_zero;
};

struct McmcOptions {
    int iterations = 20000;
    int burn_in = 5000;
    int adaptation = 1000;
    /// Multiplies the default proposal scale 2.4 diag((-Hess H)^{-1/2}) / sqrt(p).
    double scale = 1.0;
    double target_acceptance = 0.234;
    std::uint64_t seed = 0;
};

/// Damped Newton ascent on H over the closed box, with ridge fallback and
/// projection. Returns converged = false after max_iterations rather than
/// throwing. Throws NonIdentifiableError for theta-free objectives.
EstimationResult qmle(const Objective& objective, const Box& box, const Vector& theta_init,
                      const NewtonOptions& opts = {});

/**
 * Maximizer of H(theta) - sum_j xi_j |theta_j|^q by local quadratic
 * approximation.
 *
 * Each active penalty term is replaced by its quadratic majorant at the
 * current iterate, the resulting Newton system is solved (with ridge
 * fallback) and the step is backtracked until the penalized objective does
 * not decrease. Coordinates falling below `deletion_threshold` are set to
 * exactly zero and stay deleted for the rest of the solve. Coordinates with
 * zero weight are never deleted.
 */
EstimationResult penalized_qmle(const Objective& objective, const Box& box, const PenaltySpec& penalty, double n,
                                const Vector& theta_init, const LqaOptions& opts = {},
                                const RateSpec* rates = nullptr);

/// Posterior mean under exp(H) and a uniform prior on the box, by
/// random-walk Metropolis started at `start`.
EstimationResult qbe(const Objective& objective, const Box& box, const Vector& start, const McmcOptions& opts = {});

/// Geyer initial-positive-sequence effective sample size of a chain.
double effective_sample_size(const std::vector<double>& chain);

}  // namespace pqla
