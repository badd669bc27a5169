#include "pqla/penalties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pqla {

SupportPartition SupportPartition::from_theta(const Vector& theta) {
    SupportPartition s;
    for (int j = 0; j < theta.size(); ++j) (theta[j] == 0.0 ? s.zero_set : s.nonzero_set).push_back(j);
    return s;
}

SupportPartition SupportPartition::full(int p) {
    SupportPartition s;
    for (int j = 0; j < p; ++j) s.nonzero_set.push_back(j);
    return s;
}

bool SupportPartition::is_zero(int j) const {
    return std::find(zero_set.begin(), zero_set.end(), j) != zero_set.end();
}

std::vector<bool> SupportPartition::zero_mask() const {
    std::vector<bool> mask(static_cast<std::size_t>(dim()), false);
    for (int j : zero_set) mask[static_cast<std::size_t>(j)] = true;
    return mask;
}

Vector SupportPartition::select(const Vector& x, const std::vector<int>& idx) const {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[idx[i]];
    return out;
}

Matrix SupportPartition::block(const Matrix& a, const std::vector<int>& rows, const std::vector<int>& cols) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(rows[i], cols[j]);
        }
    }
    return out;
}

WeightRule parse_weight_rule(std::string_view text) {
    if (text == "n^{q'/2}" || text == "sample-size-power") return WeightRule::SampleSizePower;
    if (text == "|alpha|^{-q'}" || text == "rate-power") return WeightRule::RatePowerQPrime;
    if (text == "|alpha|^{-1}" || text == "rate-inverse") return WeightRule::RateInverse;
    throw ConfigError("unknown weights rule '" + std::string(text) + "'");
}

std::string to_string(WeightRule rule) {
    switch (rule) {
        case WeightRule::SampleSizePower: return "n^{q'/2}";
        case WeightRule::RatePowerQPrime: return "|alpha|^{-q'}";
        case WeightRule::RateInverse: return "|alpha|^{-1}";
    }
    return "?";
}

PenaltyKind parse_penalty_kind(std::string_view text) {
    if (text == "bridge") return PenaltyKind::Bridge;
    if (text == "lasso") return PenaltyKind::Lasso;
    throw ConfigError("unknown penalty kind '" + std::string(text) + "'");
}

std::string to_string(PenaltyKind kind) { return kind == PenaltyKind::Bridge ? "bridge" : "lasso"; }

PenaltySpec PenaltySpec::bridge_default() { return PenaltySpec{}; }

PenaltySpec PenaltySpec::lasso() {
    PenaltySpec s;
    s.kind = PenaltyKind::Lasso;
    s.q = 1.0;
    s.q_prime = 1.0;
    s.weights_rule = WeightRule::RateInverse;
    return s;
}

void PenaltySpec::validate() const {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("penalty exponent q must lie in (0, 1]");
    if (kind == PenaltyKind::Lasso && q != 1.0) throw ConfigError("lasso penalty requires q = 1");
    if (kind == PenaltyKind::Bridge && !(q < q_prime && q_prime <= 1.0)) {
        throw ConfigError("bridge penalty requires q < q' <= 1");
    }
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(c0 > 0.0)) throw ConfigError("c0 must be positive");
    if (weight_override) {
        for (Eigen::Index j = 0; j < weight_override->size(); ++j) {
            if (!((*weight_override)[j] >= 0.0) || !std::isfinite((*weight_override)[j])) {
                throw ConfigError("weight overrides must be finite and non-negative");
            }
        }
    }
}

Vector PenaltySpec::weights(double n, const RateSpec& rates) const {
    if (weight_override) return *weight_override;
    const Vector alpha = rates.alpha(n);
    Vector xi(alpha.size());
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        switch (weights_rule) {
            case WeightRule::SampleSizePower: xi[j] = std::pow(n, q_prime / 2.0); break;
            case WeightRule::RatePowerQPrime: xi[j] = std::pow(std::abs(alpha[j]), -q_prime); break;
            case WeightRule::RateInverse: xi[j] = 1.0 / std::abs(alpha[j]); break;
        }
        if (cap) xi[j] = std::min(xi[j], c0 / std::abs(alpha[j]));
    }
    return xi;
}

double PenaltySpec::unit(double x) const { return q == 1.0 ? std::abs(x) : std::pow(std::abs(x), q); }

double penalty_value(const PenaltySpec& spec, double n, const Vector& theta, const RateSpec& rates) {
    const Vector xi = spec.weights(n, rates);
    if (xi.size() != theta.size()) throw ArgumentError("penalty: weight and parameter dimensions differ");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta[j] != 0.0) acc += xi[j] * spec.unit(theta[j]);
    }
    return acc;
}

double penalty_value(const PenaltySpec& spec, double n, const Vector& theta) {
    return penalty_value(spec, n, theta, RateSpec::standard(static_cast<int>(theta.size())));
}

double penalized_objective(const Objective& objective, const PenaltySpec& spec, double n, const Vector& theta,
                           const RateSpec& rates) {
    return objective.value(theta) - penalty_value(spec, n, theta, rates);
}

double penalized_objective(const Objective& objective, const PenaltySpec& spec, double n, const Vector& theta) {
    return penalized_objective(objective, spec, n, theta, RateSpec::standard(static_cast<int>(theta.size())));
}

Vector tilde_rates(const PenaltySpec& spec, const RateSpec& rates, double n, const SupportPartition& support) {
    Vector out = rates.alpha(n);
    const Vector xi = spec.weights(n, rates);
    for (int j : support.zero_set) out[j] = std::pow(xi[j], -1.0 / spec.q);
    return out;
}

Matrix g_matrix(const PenaltySpec& spec, const RateSpec& rates, double n, const SupportPartition& support) {
    const Vector t = tilde_rates(spec, rates, n, support);
    const Vector alpha = rates.alpha(n);
    return (t.array() / alpha.array()).matrix().asDiagonal();
}

// ---------------------------------------------------------------------------
// Condition checks

namespace {

// coef * n^exponent
struct PowerLaw {
    double coef = 1.0;
    double exponent = 0.0;

    double at(double n) const { return coef * std::pow(n, exponent); }
    double limit() const {
        if (std::abs(exponent) < 1e-12) return coef;
        return exponent < 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
};

PowerLaw operator*(PowerLaw a, PowerLaw b) { return {a.coef * b.coef, a.exponent + b.exponent}; }
PowerLaw pow(PowerLaw a, double k) { return {std::pow(a.coef, k), a.exponent * k}; }

// The branch of min(a, b) that is active for large n.
PowerLaw asymptotic_min(PowerLaw a, PowerLaw b) {
    if (std::abs(a.exponent - b.exponent) < 1e-12) return a.coef <= b.coef ? a : b;
    return a.exponent < b.exponent ? a : b;
}

PowerLaw alpha_law(const RateSpec& rates, int j) { return {rates.coefficient[j], -rates.exponent[j]}; }

PowerLaw weight_law(const PenaltySpec& spec, const RateSpec& rates, int j) {
    if (spec.weight_override) return {(*spec.weight_override)[j], 0.0};
    const PowerLaw alpha = alpha_law(rates, j);
    PowerLaw xi;
    switch (spec.weights_rule) {
        case WeightRule::SampleSizePower: xi = {1.0, spec.q_prime / 2.0}; break;
        case WeightRule::RatePowerQPrime: xi = pow(alpha, -spec.q_prime); break;
        case WeightRule::RateInverse: xi = pow(alpha, -1.0); break;
    }
    if (spec.cap) xi = asymptotic_min(xi, pow(alpha, -1.0) * PowerLaw{spec.c0, 0.0});
    return xi;
}

std::string describe(const PowerLaw& law) {
    std::ostringstream os;
    os << law.coef << " * n^(" << law.exponent << ")";
    return os.str();
}

}  // namespace

const ConditionCheck& ConditionReport::get(std::string_view name) const {
    for (const auto& c : checks) {
        if (c.name == name) return c;
    }
    throw ArgumentError("no condition named '" + std::string(name) + "' in report");
}

ConditionReport verify_conditions(const PenaltySpec& spec, const RateSpec& rates, std::span<const double> n_grid,
                                  const SupportPartition& support, const Vector* theta_star) {
    spec.validate();
    rates.validate();
    if (n_grid.empty()) throw ArgumentError("verify_conditions: n_grid is empty");
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
        if (!(n_grid[i] > n_grid[i - 1])) throw ArgumentError("verify_conditions: n_grid must be increasing");
    }
    const int p = rates.dim();
    if (support.dim() != p) throw ArgumentError("verify_conditions: support and rates differ in dimension");
    if (theta_star != nullptr && theta_star->size() != p) throw ArgumentError("verify_conditions: theta* dimension");
    if (spec.weight_override && spec.weight_override->size() != p) {
        throw ArgumentError("verify_conditions: weight override dimension");
    }

    const std::vector<double> grid(n_grid.begin(), n_grid.end());
    ConditionReport report;

    // p(x) = |x|^q with q in (0, 1]: smooth away from 0, bounded near 0.
    report.checks.push_back({"A2", grid, {}, std::nullopt, std::nullopt, true,
                             "|x|^q is differentiable on R \\ {0}"});
    report.checks.push_back({"A3", grid, {}, std::nullopt, std::nullopt, true,
                             "sup_{|x|<1} |x|^q = 1 < infinity"});

    // A4: sup_n |alpha xi| <= c0 on J1.
    {
        ConditionCheck c{"A4", grid, std::vector<double>(grid.size(), 0.0), std::nullopt, std::nullopt, true, ""};
        double worst_exponent = -std::numeric_limits<double>::infinity();
        double worst_limit = 0.0;
        for (int j : support.nonzero_set) {
            const PowerLaw law = alpha_law(rates, j) * weight_law(spec, rates, j);
            worst_exponent = std::max(worst_exponent, law.exponent);
            worst_limit = std::max(worst_limit, law.limit());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double value = rates.alpha(grid[i])[j] * spec.weights(grid[i], rates)[j];
                c.sequence[i] = std::max(c.sequence[i], std::abs(value));
            }
        }
        if (support.nonzero_set.empty()) {
            c.detail = "J1 is empty; condition holds vacuously";
        } else {
            c.exponent = worst_exponent;
            c.limit = worst_limit;
            const double grid_max = *std::max_element(c.sequence.begin(), c.sequence.end());
            c.pass = worst_exponent <= 1e-12 && grid_max <= spec.c0 && worst_limit <= spec.c0;
            c.detail = "max_j |alpha xi| on the grid = " + format_double(grid_max) + ", c0 = " + format_double(spec.c0);
        }
        report.checks.push_back(std::move(c));
    }

    // A5: lim_{x->0} p(x)/|x|^q.
    {
        ConditionCheck c{"A5", grid, {}, std::nullopt, 1.0, true, ""};
        double ratio = 0.0;
        for (double x : {1e-2, 1e-4, 1e-8}) ratio = spec.unit(x) / std::pow(x, spec.q);
        c.pass = std::abs(ratio - 1.0) < 1e-12 && spec.lambda > 0.0;
        c.detail = "p(x)/|x|^q = " + format_double(ratio) + " near 0; lambda = " + format_double(spec.lambda);
        report.checks.push_back(std::move(c));
    }

    // A6: xi^{-1/q} alpha^{-1} -> 0 on J0.
    {
        ConditionCheck c{"A6", grid, std::vector<double>(grid.size(), 0.0), std::nullopt, std::nullopt, true, ""};
        double worst_exponent = -std::numeric_limits<double>::infinity();
        double worst_limit = 0.0;
        PowerLaw worst;
        for (int j : support.zero_set) {
            const PowerLaw law = pow(weight_law(spec, rates, j), -1.0 / spec.q) * pow(alpha_law(rates, j), -1.0);
            if (law.exponent > worst_exponent) worst = law;
            worst_exponent = std::max(worst_exponent, law.exponent);
            worst_limit = std::max(worst_limit, law.limit());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double xi = spec.weights(grid[i], rates)[j];
                const double value = std::pow(xi, -1.0 / spec.q) / std::abs(rates.alpha(grid[i])[j]);
                c.sequence[i] = std::max(c.sequence[i], value);
            }
        }
        if (support.zero_set.empty()) {
            c.detail = "J0 is empty; condition holds vacuously";
        } else {
            c.exponent = worst_exponent;
            c.limit = worst_limit;
            c.pass = worst_limit == 0.0;
            c.detail = "worst sequence " + describe(worst);
        }
        report.checks.push_back(std::move(c));
    }

    // A11: xi alpha -> beta_j on J1.
    {
        ConditionCheck c{"A11", grid, std::vector<double>(grid.size(), 0.0), std::nullopt, std::nullopt, true, ""};
        report.beta = Vector::Zero(p);
        double worst_exponent = -std::numeric_limits<double>::infinity();
        for (int j : support.nonzero_set) {
            const PowerLaw law = alpha_law(rates, j) * weight_law(spec, rates, j);
            worst_exponent = std::max(worst_exponent, law.exponent);
            report.beta[j] = law.limit();
            if (!std::isfinite(report.beta[j])) c.pass = false;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                c.sequence[i] = std::max(c.sequence[i], rates.alpha(grid[i])[j] * spec.weights(grid[i], rates)[j]);
            }
        }
        if (support.nonzero_set.empty()) {
            c.detail = "J1 is empty; condition holds vacuously";
        } else {
            c.exponent = worst_exponent;
            c.limit = report.beta.maxCoeff();
            c.detail = "beta_j = lim xi alpha; max beta = " + format_double(report.beta.maxCoeff());
        }
        report.checks.push_back(std::move(c));
    }

    if (theta_star != nullptr) {
        report.psi = Vector::Zero(p);
        for (int j : support.nonzero_set) {
            const double t = (*theta_star)[j];
            if (t == 0.0 || !std::isfinite(report.beta[j])) continue;
            const double derivative = spec.q * std::pow(std::abs(t), spec.q - 1.0) * (t > 0.0 ? 1.0 : -1.0);
            report.psi[j] = report.beta[j] * derivative;
        }
    }
    return report;
}

}  // namespace pqla
