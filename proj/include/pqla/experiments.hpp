#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pqla/asymptotics.hpp"
#include "pqla/optimizer.hpp"
#include "pqla/penalties.hpp"

namespace pqla {

inline constexpr int kSchemaVersion = 1;

enum class SelectionClass { Under, Over, Exact, Mixed };

std::string to_string(SelectionClass c);

/// Compares the zero set of theta_hat with the true zero set: exact when
/// equal, under when it contains it, over when it is contained in it.
SelectionClass classify_selection(const Vector& theta_hat, const SupportPartition& truth);

struct ExperimentConfig {
    ModelSpec model = volatility_regression_model(10);
    Vector theta_star = default_theta_star();
    std::vector<int> n_grid{1000, 2000, 3000, 10000};
    int replications = 300;
    int refinement = 10;
    PenaltySpec penalty = PenaltySpec::bridge_default();
    std::uint64_t master_seed = 20240601;
    std::vector<Method> estimators{Method::Qmle, Method::Penalized};
    int workers = 1;
    NewtonOptions newton;
    LqaOptions lqa;
    McmcOptions mcmc;

    /// (0, 1, 0, 1, 2, 0, 1, 1, 1, 0).
    static Vector default_theta_star();

    void validate() const;
    RateSpec rates() const { return RateSpec::standard(model.p); }
    SupportPartition truth() const { return SupportPartition::from_theta(theta_star); }
    bool uses(Method m) const;
};

struct EstimatorOutcome {
    Method method = Method::Qmle;
    std::optional<EstimationResult> result;
    std::string error;
    SelectionClass selection = SelectionClass::Mixed;
    /// Gamma_n^(11)^{1/2} sqrt(n) (theta_hat^(1) - theta*^(1)) with Gamma_n the
    /// observed information at theta*; kept in memory only.
    Vector studentized;

    /// Result present and converged.
    bool usable() const { return result.has_value() && result->converged; }
};

struct ReplicationRecord {
    int n = 0;
    int index = 0;
    std::uint64_t seed = 0;
    std::vector<EstimatorOutcome> outcomes;
    std::string error;  ///< simulation failure
    double wall_seconds = 0.0;

    const EstimatorOutcome* find(Method m) const;
};

/// Simulate, estimate with every configured estimator and classify.
/// Estimator failures are recorded, never thrown.
ReplicationRecord run_replication(const ExperimentConfig& cfg, int n, int index);

/// Replications [first, first + count) at sample size n on cfg.workers
/// threads, returned in index order.
std::vector<ReplicationRecord> run_replications(const ExperimentConfig& cfg, int n, int first, int count);

struct CellStats {
    double mean = 0.0;
    std::optional<double> sd;
    /// P(theta_hat_j = 0) on the true zero set, P(theta_hat_j != 0) elsewhere.
    double prob = 0.0;
    int count = 0;
};

struct SelectionRates {
    double under = 0.0;
    double over = 0.0;
    double exact = 0.0;
    double under_se = 0.0;
    double over_se = 0.0;
    double exact_se = 0.0;
    int count = 0;
    int failures = 0;
    double failure_rate = 0.0;
};

struct StudyReport {
    ExperimentConfig config;
    /// cells[e][i][j]: estimator e, n_grid[i], coordinate j.
    std::vector<std::vector<std::vector<CellStats>>> cells;
    /// rates[e][i].
    std::vector<std::vector<SelectionRates>> rates;
    std::vector<ReplicationRecord> records;
    double total_seconds = 0.0;

    const CellStats& cell(Method m, int n, int j) const;
    const SelectionRates& selection(Method m, int n) const;
    /// Converged estimates of one estimator at one n, in index order.
    std::vector<Vector> estimates(Method m, int n) const;
};

/// Aggregates records (sorted by (n, index) first). Throws
/// OptimizationError when every replication failed for some n.
StudyReport aggregate(const ExperimentConfig& cfg, std::vector<ReplicationRecord> records);

StudyReport run_study(const ExperimentConfig& cfg);

/// Table-1 style CSV: one row per coordinate x estimator x statistic, one
/// column per n. Independent of wall-clock time and worker count.
std::string report_csv(const StudyReport& report);
/// JSON report with the config echo and per-replication seeds (sorted keys).
std::string report_json(const StudyReport& report);
/// Selection probability versus n, one line per coordinate and one for the
/// true-model rate.
std::string report_svg(const StudyReport& report);

/// Kolmogorov-Smirnov test of a sample against N(0, 1).
struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};
KsResult ks_normal_test(std::vector<double> sample);

/// sup_{u in probes} |r_n(u)| of the LAQ remainder at a coarse and a fine
/// sample size sharing one simulated path, with the limit Gamma(theta*) as
/// the quadratic form.
struct LaqPair {
    std::uint64_t seed = 0;
    double coarse = 0.0;
    double fine = 0.0;
};

struct LaqStudy {
    int n_coarse = 1000;
    int n_fine = 10000;
    int replications = 100;
    int probes = 100;
    double radius = 2.0;
};

std::vector<LaqPair> laq_remainder_study(const ExperimentConfig& cfg, const LaqStudy& study);

/// Fixed probe set: `count` points drawn uniformly in the ball of the given
/// radius in R^p (the origin excluded).
std::vector<Vector> probe_points(int p, int count, double radius, std::uint64_t seed);

}  // namespace pqla
