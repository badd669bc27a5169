#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pqla/optimizer.hpp"
#include "pqla/penalties.hpp"
#include "pqla/quasi_likelihood.hpp"

namespace pqla {

/// Coordinate bounds of U_n = {u : theta* + a_n u in the closed box}.
Box local_box(const Box& box, const Vector& theta_star, const RateSpec& rates, double n);

/// log Z_n(u) = H_n(theta* + a_n u) - H_n(theta*), or the penalized version
/// with H_n^dagger = H_n - p_n when `penalty` is non-null. Throws DomainError
/// when u is outside U_n.
double log_field_value(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                       double n, const Vector& u, const PenaltySpec* penalty = nullptr);
double field_value(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                   double n, const Vector& u, const PenaltySpec* penalty = nullptr);

/// Sampled lower bound of log sup_{u in U_n, |u| >= r} Z_n(u): random shell
/// probes followed by projected-gradient ascent from the best of them.
/// Returns -inf when the shell is empty.
struct ShellSearch {
    int starts = 20;
    int probes = 200;
    int ascent_iterations = 60;
};

double shell_log_supremum(const Objective& objective, const Box& box, const Vector& theta_star,
                          const RateSpec& rates, double n, double r, const PenaltySpec* penalty,
                          std::mt19937_64& rng, const ShellSearch& search = {});

struct TailCurve {
    std::vector<double> r;
    std::vector<double> raw;       ///< fraction of replications exceeding the threshold
    std::vector<double> estimate;  ///< nonincreasing (isotonic) version of raw
    std::vector<double> mc_stderr;
    /// Least-squares fit log P = log C - L log r over the positive estimates.
    std::optional<double> fitted_L;
    std::optional<double> fitted_log_C;
    int replications = 0;
    double epsilon = 0.5;
    std::string label = "lower-bound tail estimate";
};

/// Replication-level inputs of the tail diagnostic.
struct TailStudy {
    ModelSpec model;
    Vector theta_star;
    int n = 1000;
    int refinement = 10;
    int replications = 200;
    double epsilon = 0.5;
    std::vector<double> r_grid;
    bool penalized = true;
    PenaltySpec penalty = PenaltySpec::bridge_default();
    std::optional<RateSpec> rates;
    std::uint64_t master_seed = 0;
    int workers = 1;
    ShellSearch search;
};

/// Empirical P[sup_{|u| >= r} Z_n(u) >= exp(-r^{2 - epsilon})] over seeded
/// replications. Only for p <= 3 (ConfigError otherwise).
TailCurve pldi_tail_estimate(const TailStudy& study);

/// Pool adjacent violators: the closest nonincreasing sequence in least squares.
std::vector<double> isotonic_nonincreasing(std::span<const double> values);

/// Largest |H_n(theta*+a u) - H_n(theta*+a v)| / |u - v|^q over random pairs
/// in {|u| < M} intersected with U_n. A lower bound of the supremum.
double holder_quotient(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                       double n, double q, double radius, int samples, std::uint64_t seed);

struct MomentEstimate {
    double value = 0.0;
    double mc_stderr = 0.0;
    int count = 0;
};

/// Mean of |a_n^{-1}(theta_hat - theta*)|^m.
MomentEstimate moment_estimate(std::span<const Vector> estimates, const Vector& theta_star, const RateSpec& rates,
                               double n, double m);
MomentEstimate moment_estimate(std::span<const EstimationResult> results, const Vector& theta_star,
                               const RateSpec& rates, double n, double m);
/// Mean of |Psi theta_hat^(0)|^m with Psi diagonal over the zero set.
MomentEstimate zero_block_moment(std::span<const Vector> estimates, const SupportPartition& support,
                                 const Vector& psi_diagonal, double m);

struct LimitLaw {
    Matrix gamma11;
    Vector psi1;
    SupportPartition support;
};

/// `count` x p draws of the limit of the penalized estimator: zeros on the
/// zero set, (Gamma11)^{-1}(Delta - psi) with Delta ~ N(0, Gamma11) elsewhere.
Matrix limit_law_sample(const LimitLaw& law, int count, std::uint64_t seed);

/// CSV with columns `<key>,estimate,mc_stderr` preceded by `# ` comment lines.
void write_estimate_csv(const std::filesystem::path& path, const std::string& key, std::span<const double> keys,
                        std::span<const double> estimates, std::span<const double> stderrs,
                        const std::vector<std::string>& comments = {});
void write_tail_csv(const std::filesystem::path& path, const TailCurve& curve,
                    const std::vector<std::string>& comments = {});

}  // namespace pqla
