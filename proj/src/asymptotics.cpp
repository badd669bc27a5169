#include "pqla/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "parallel.hpp"

namespace pqla {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector rate_vector(const RateSpec& rates, int p, double n) {
    rates.validate();
    if (rates.dim() != p) throw ArgumentError("rate dimension differs from the parameter dimension");
    return rates.alpha(n);
}

// Field evaluator with H(theta*) and p(theta*) cached.
class Field {
public:
    Field(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates, double n,
          const PenaltySpec* penalty)
        : obj_(objective), box_(box), theta_star_(theta_star), alpha_(rate_vector(rates, objective.dim(), n)),
          local_(local_box(box, theta_star, rates, n)) {
        if (penalty != nullptr) {
            penalty->validate();
            q_ = penalty->q;
            xi_ = penalty->weights(n, rates);
        }
        base_ = obj_.value(theta_star_) - penalty_at(theta_star_);
    }

    const Box& local() const { return local_; }

    double log_value(const Vector& u) const {
        if (u.isZero(0.0)) return 0.0;
        const Vector theta = box_.project(theta_star_ + alpha_.cwiseProduct(u));
        return obj_.value(theta) - penalty_at(theta) - base_;
    }

    double safe_log_value(const Vector& u) const {
        try {
            const double v = log_value(u);
            return std::isfinite(v) ? v : kNegInf;
        } catch (const EvaluationError&) {
            return kNegInf;
        }
    }

    Vector gradient(const Vector& u) const {
        const Vector theta = box_.project(theta_star_ + alpha_.cwiseProduct(u));
        Vector g = obj_.gradient(theta);
        if (xi_.size() > 0) {
            for (Eigen::Index j = 0; j < g.size(); ++j) {
                if (theta[j] == 0.0 || xi_[j] == 0.0) continue;
                g[j] -= xi_[j] * q_ * std::pow(std::abs(theta[j]), q_ - 1.0) * (theta[j] > 0.0 ? 1.0 : -1.0);
            }
        }
        return alpha_.cwiseProduct(g);
    }

private:
    double penalty_at(const Vector& theta) const {
        if (xi_.size() == 0) return 0.0;
        double acc = 0.0;
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            if (theta[j] != 0.0 && xi_[j] != 0.0) acc += xi_[j] * std::pow(std::abs(theta[j]), q_);
        }
        return acc;
    }

    const Objective& obj_;
    const Box& box_;
    Vector theta_star_;
    Vector alpha_;
    Box local_;
    Vector xi_;
    double q_ = 1.0;
    double base_ = 0.0;
};

Vector random_direction(int p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(p);
    for (;;) {
        for (int j = 0; j < p; ++j) z[j] = normal(rng);
        const double norm = z.norm();
        if (norm > 1e-12) return z / norm;
    }
}

}  // namespace

Box local_box(const Box& box, const Vector& theta_star, const RateSpec& rates, double n) {
    const int p = box.dim();
    if (theta_star.size() != p) throw ArgumentError("theta* dimension differs from the box");
    if (!box.contains(theta_star)) throw DomainError("theta* lies outside the parameter box");
    const Vector alpha = rate_vector(rates, p, n);
    std::vector<Interval> out(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        out[static_cast<std::size_t>(j)] = {(box[j].lo - theta_star[j]) / alpha[j],
                                            (box[j].hi - theta_star[j]) / alpha[j]};
    }
    return Box(std::move(out));
}

double log_field_value(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                       double n, const Vector& u, const PenaltySpec* penalty) {
    const Field field(objective, box, theta_star, rates, n, penalty);
    if (u.size() != objective.dim()) throw ArgumentError("u has the wrong dimension");
    if (!field.local().contains(u)) throw DomainError("u lies outside U_n");
    return field.log_value(u);
}

double field_value(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                   double n, const Vector& u, const PenaltySpec* penalty) {
    return std::exp(log_field_value(objective, box, theta_star, rates, n, u, penalty));
}

double shell_log_supremum(const Objective& objective, const Box& box, const Vector& theta_star,
                          const RateSpec& rates, double n, double r, const PenaltySpec* penalty,
                          std::mt19937_64& rng, const ShellSearch& search) {
    const Field field(objective, box, theta_star, rates, n, penalty);
    const Box& lb = field.local();
    const int p = objective.dim();

    double far2 = 0.0;
    for (int j = 0; j < p; ++j) far2 += std::max(lb[j].lo * lb[j].lo, lb[j].hi * lb[j].hi);
    if (far2 < r * r) return kNegInf;

    // Map onto {|u| >= r} within U_n; false when the box cuts the radial push.
    auto project = [&](Vector& u) {
        u = lb.project(u);
        const double norm = u.norm();
        if (norm >= r) return true;
        if (norm == 0.0) return false;
        u = lb.project(u * (r / norm));
        return u.norm() >= r * (1.0 - 1e-12);
    };

    struct Probe {
        Vector u;
        double value;
    };
    std::vector<Probe> probes;
    probes.reserve(static_cast<std::size_t>(search.probes));
    std::exponential_distribution<double> stretch(1.0);
    for (int attempt = 0; attempt < 20 * search.probes && static_cast<int>(probes.size()) < search.probes;
         ++attempt) {
        const double radius = attempt % 2 == 0 ? r : r * (1.0 + stretch(rng));
        Vector u = radius * random_direction(p, rng);
        if (!project(u)) continue;
        probes.push_back({u, field.safe_log_value(u)});
    }
    if (probes.empty()) {
        // Fall back to the corner farthest from the origin.
        Vector u(p);
        for (int j = 0; j < p; ++j) u[j] = std::abs(lb[j].lo) > std::abs(lb[j].hi) ? lb[j].lo : lb[j].hi;
        probes.push_back({u, field.safe_log_value(u)});
    }

    std::sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& b) { return a.value > b.value; });
    double best = probes.front().value;

    const auto starts = std::min<std::size_t>(probes.size(), static_cast<std::size_t>(search.starts));
    for (std::size_t s = 0; s < starts; ++s) {
        Vector u = probes[s].u;
        double value = probes[s].value;
        if (value == kNegInf) continue;
        double step = 0.25 * std::max(r, 1.0);
        for (int it = 0; it < search.ascent_iterations && step > 1e-6; ++it) {
            Vector g;
            try {
                g = field.gradient(u);
            } catch (const EvaluationError&) {
                break;
            }
            const double gnorm = g.norm();
            if (!(gnorm > 0.0) || !std::isfinite(gnorm)) break;
            Vector trial = u + (step / gnorm) * g;
            if (!project(trial)) {
                step *= 0.5;
                continue;
            }
            const double tv = field.safe_log_value(trial);
            if (tv > value) {
                u = trial;
                value = tv;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        best = std::max(best, value);
    }
    return best;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> values) {
    // Pool adjacent violators on blocks of (mean, weight).
    std::vector<double> mean;
    std::vector<std::size_t> size;
    for (double v : values) {
        mean.push_back(v);
        size.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
            const std::size_t k = mean.size() - 1;
            const double total = mean[k - 1] * static_cast<double>(size[k - 1]) + mean[k] * static_cast<double>(size[k]);
            size[k - 1] += size[k];
            mean[k - 1] = total / static_cast<double>(size[k - 1]);
            mean.pop_back();
            size.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), size[b], mean[b]);
    return out;
}

TailCurve pldi_tail_estimate(const TailStudy& study) {
    study.model.validate();
    const int p = study.model.p;
    if (p > 3) throw ConfigError("PLDI tail diagnostic needs p <= 3 (got p = " + std::to_string(p) + ")");
    if (study.replications < 50) throw ConfigError("PLDI tail diagnostic needs at least 50 replications");
    if (study.r_grid.empty()) throw ConfigError("PLDI tail diagnostic needs a non-empty r grid");
    if (!(study.epsilon > 0.0 && study.epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (study.theta_star.size() != p) throw ConfigError("theta* dimension differs from p");
    for (std::size_t i = 1; i < study.r_grid.size(); ++i) {
        if (!(study.r_grid[i] > study.r_grid[i - 1])) throw ConfigError("r grid must be increasing");
    }
    if (study.penalized) study.penalty.validate();
    const RateSpec rates = study.rates.value_or(RateSpec::standard(p));
    const std::size_t grid = study.r_grid.size();
    const auto reps = static_cast<std::size_t>(study.replications);

    std::vector<std::vector<char>> exceed(reps, std::vector<char>(grid, 0));
    detail::parallel_for(reps, study.workers, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(study.master_seed, static_cast<std::uint64_t>(study.n), i);
        const PathBundle paths = simulate_paths(study.model, study.n, study.refinement, seed);
        const Dataset ds = simulate_observation(study.model, study.theta_star, paths);
        const QuasiLikelihood h(ds, study.model);
        std::mt19937_64 rng(mix64(seed ^ 0x5bd1e995ULL));
        for (std::size_t k = 0; k < grid; ++k) {
            const double r = study.r_grid[k];
            const double sup = shell_log_supremum(h, study.model.theta_box, study.theta_star, rates, study.n, r,
                                                  study.penalized ? &study.penalty : nullptr, rng, study.search);
            exceed[i][k] = sup >= -std::pow(r, 2.0 - study.epsilon) ? 1 : 0;
        }
    });

    TailCurve curve;
    curve.r = study.r_grid;
    curve.replications = study.replications;
    curve.epsilon = study.epsilon;
    curve.raw.assign(grid, 0.0);
    for (std::size_t k = 0; k < grid; ++k) {
        double count = 0.0;
        for (std::size_t i = 0; i < reps; ++i) count += exceed[i][k];
        curve.raw[k] = count / static_cast<double>(reps);
    }
    curve.estimate = isotonic_nonincreasing(curve.raw);
    for (double e : curve.estimate) curve.mc_stderr.push_back(std::sqrt(e * (1.0 - e) / static_cast<double>(reps)));

    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < grid; ++k) {
        if (curve.estimate[k] > 0.0 && curve.r[k] > 0.0) {
            xs.push_back(std::log(curve.r[k]));
            ys.push_back(std::log(curve.estimate[k]));
        }
    }
    if (xs.size() >= 2) {
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        if (sxx > 0.0) {
            curve.fitted_L = -sxy / sxx;
            curve.fitted_log_C = my + *curve.fitted_L * mx;
        }
    }
    return curve;
}

double holder_quotient(const Objective& objective, const Box& box, const Vector& theta_star, const RateSpec& rates,
                       double n, double q, double radius, int samples, std::uint64_t seed) {
    if (!(radius > 0.0)) throw ArgumentError("holder_quotient: radius must be positive");
    if (samples < 1) throw ArgumentError("holder_quotient: need at least one sample");
    if (!(q > 0.0)) throw ArgumentError("holder_quotient: exponent must be positive");
    const Field field(objective, box, theta_star, rates, n, nullptr);
    const int p = objective.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&] {
        return Vector(radius * std::pow(unif(rng), 1.0 / p) * random_direction(p, rng));
    };

    double best = 0.0;
    int valid = 0;
    for (long attempt = 0; attempt < 1000L * samples && valid < samples; ++attempt) {
        const Vector u = draw();
        const Vector v = draw();
        if (!field.local().contains(u) || !field.local().contains(v)) continue;
        const double dist = (u - v).norm();
        if (dist == 0.0) continue;
        ++valid;
        const double diff = std::abs(field.log_value(u) - field.log_value(v));
        best = std::max(best, diff / std::pow(dist, q));
    }
    if (valid == 0) throw DomainError("holder_quotient: no pair of points of the ball lies in U_n");
    return best;
}

namespace {

MomentEstimate summarize(const std::vector<double>& terms) {
    MomentEstimate out;
    out.count = static_cast<int>(terms.size());
    const double count = static_cast<double>(terms.size());
    out.value = std::accumulate(terms.begin(), terms.end(), 0.0) / count;
    if (terms.size() > 1) {
        double ss = 0.0;
        for (double t : terms) ss += (t - out.value) * (t - out.value);
        out.mc_stderr = std::sqrt(ss / (count - 1.0) / count);
    }
    return out;
}

}  // namespace

MomentEstimate moment_estimate(std::span<const Vector> estimates, const Vector& theta_star, const RateSpec& rates,
                               double n, double m) {
    if (estimates.empty()) throw ArgumentError("moment_estimate: no estimates");
    if (!(m > 0.0)) throw ArgumentError("moment_estimate: m must be positive");
    const Vector alpha = rate_vector(rates, static_cast<int>(theta_star.size()), n);
    std::vector<double> terms;
    terms.reserve(estimates.size());
    for (const Vector& est : estimates) {
        if (est.size() != theta_star.size()) throw ArgumentError("moment_estimate: dimension mismatch");
        terms.push_back(std::pow((est - theta_star).cwiseQuotient(alpha).norm(), m));
    }
    return summarize(terms);
}

MomentEstimate moment_estimate(std::span<const EstimationResult> results, const Vector& theta_star,
                               const RateSpec& rates, double n, double m) {
    std::vector<Vector> estimates;
    estimates.reserve(results.size());
    for (const auto& r : results) estimates.push_back(r.theta_hat);
    return moment_estimate(std::span<const Vector>(estimates), theta_star, rates, n, m);
}

MomentEstimate zero_block_moment(std::span<const Vector> estimates, const SupportPartition& support,
                                 const Vector& psi_diagonal, double m) {
    if (estimates.empty()) throw ArgumentError("zero_block_moment: no estimates");
    if (!(m > 0.0)) throw ArgumentError("zero_block_moment: m must be positive");
    if (psi_diagonal.size() != static_cast<Eigen::Index>(support.zero_set.size())) {
        throw ArgumentError("zero_block_moment: scaling must have one entry per zero coordinate");
    }
    std::vector<double> terms;
    for (const Vector& est : estimates) {
        const Vector block = support.select(est, support.zero_set);
        terms.push_back(std::pow(psi_diagonal.cwiseProduct(block).norm(), m));
    }
    return summarize(terms);
}

Matrix limit_law_sample(const LimitLaw& law, int count, std::uint64_t seed) {
    if (count < 1) throw ArgumentError("limit_law_sample: count must be at least 1");
    const auto k = static_cast<Eigen::Index>(law.support.nonzero_set.size());
    if (law.gamma11.rows() != k || law.gamma11.cols() != k || law.psi1.size() != k) {
        throw ArgumentError("limit_law_sample: gamma11 and psi1 must match the nonzero set");
    }
    if (!law.gamma11.isApprox(law.gamma11.transpose(), 1e-12)) {
        throw ArgumentError("limit_law_sample: gamma11 is not symmetric");
    }
    const Eigen::LLT<Matrix> llt(law.gamma11);
    if (llt.info() != Eigen::Success) throw ArgumentError("limit_law_sample: gamma11 is not positive definite");
    const Matrix lower = llt.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out = Matrix::Zero(count, law.support.dim());
    Vector zeta(k);
    for (int i = 0; i < count; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) zeta[j] = normal(rng);
        const Vector u = llt.solve(Vector(lower * zeta - law.psi1));
        for (Eigen::Index j = 0; j < k; ++j) out(i, law.support.nonzero_set[static_cast<std::size_t>(j)]) = u[j];
    }
    return out;
}

void write_estimate_csv(const std::filesystem::path& path, const std::string& key, std::span<const double> keys,
                        std::span<const double> estimates, std::span<const double> stderrs,
                        const std::vector<std::string>& comments) {
    if (keys.size() != estimates.size() || keys.size() != stderrs.size()) {
        throw ArgumentError("write_estimate_csv: column lengths differ");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& c : comments) out << "# " << c << '\n';
    out << key << ",estimate,mc_stderr\n";
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out << format_double(keys[i]) << ',' << format_double(estimates[i]) << ',' << format_double(stderrs[i])
            << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

void write_tail_csv(const std::filesystem::path& path, const TailCurve& curve,
                    const std::vector<std::string>& comments) {
    std::vector<std::string> all = comments;
    all.push_back(curve.label + " (epsilon=" + format_double(curve.epsilon) +
                  ", replications=" + std::to_string(curve.replications) + ")");
    if (curve.fitted_L) {
        all.push_back("fit log P = log C - L log r: L=" + format_double(*curve.fitted_L) +
                      " log_C=" + format_double(*curve.fitted_log_C));
    }
    write_estimate_csv(path, "r", curve.r, curve.estimate, curve.mc_stderr, all);
}

}  // namespace pqla
