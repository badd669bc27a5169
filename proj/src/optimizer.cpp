#include "pqla/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace pqla {

std::string to_string(Method method) {
    switch (method) {
        case Method::Qmle: return "qmle";
        case Method::Penalized: return "penalized";
        case Method::Qbe: return "qbe";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    if (text == "qmle") return Method::Qmle;
    if (text == "pql" || text == "penalized" || text == "p-ql") return Method::Penalized;
    if (text == "qbe") return Method::Qbe;
    throw ConfigError("unknown estimation method '" + std::string(text) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Objective value, or -inf where it cannot be evaluated.
double safe_value(const Objective& f, const Vector& theta) {
    try {
        const double v = f.value(theta);
        return std::isfinite(v) ? v : kNegInf;
    } catch (const EvaluationError&) {
        return kNegInf;
    }
}

// Solve (a + mu I) x = b, starting at mu = 0 and then mu = ridge_start
// doubling until the Cholesky factorization succeeds.
Vector ridge_solve(const Matrix& a, const Vector& b, double ridge_start) {
    const Eigen::Index k = a.rows();
    double mu = 0.0;
    for (int attempt = 0; attempt < 400; ++attempt) {
        const Eigen::LLT<Matrix> llt(a + mu * Matrix::Identity(k, k));
        if (llt.info() == Eigen::Success) {
            Vector x = llt.solve(b);
            if (x.allFinite()) return x;
        }
        mu = mu == 0.0 ? ridge_start : 2.0 * mu;
    }
    return b;
}

std::vector<int> nonzero_indices(const Vector& theta) {
    std::vector<int> out;
    for (int j = 0; j < theta.size(); ++j) {
        if (theta[j] != 0.0) out.push_back(j);
    }
    return out;
}

// Rounding level of objective values.
double value_noise(double value) { return 1e-10 * (1.0 + std::abs(value)); }

double projected_gradient_norm(const Box& box, const Vector& theta, const Vector& gradient) {
    double norm = 0.0;
    for (int j = 0; j < theta.size(); ++j) {
        if (!box.at_bound(theta, j, gradient[j])) norm = std::max(norm, std::abs(gradient[j]));
    }
    return norm;
}

void check_start(const Objective& f, const Box& box, const Vector& theta_init, const char* who) {
    if (box.dim() != f.dim() || theta_init.size() != f.dim()) {
        throw ArgumentError(std::string(who) + ": dimension mismatch between objective, box and start");
    }
    if (!box.contains(theta_init)) throw DomainError(std::string(who) + ": starting point lies outside the box");
}

}  // namespace

// ---------------------------------------------------------------------------

EstimationResult qmle(const Objective& objective, const Box& box, const Vector& theta_init, const NewtonOptions& opts) {
    const auto start = Clock::now();
    check_start(objective, box, theta_init, "qmle");
    const int p = objective.dim();

    EstimationResult r;
    r.method = Method::Qmle;
    r.theta_init = theta_init;

    Vector theta = theta_init;
    Evaluation e = objective.evaluate(theta, Order::Hessian);
    if (!std::isfinite(e.value)) throw OptimizationError("qmle: objective is not finite at the starting point");
    if (!objective.depends_on_theta() || (e.hessian.isZero(0.0) && e.gradient.isZero(0.0))) {
        throw NonIdentifiableError("qmle: objective does not depend on theta (Hessian identically zero)");
    }

    double grad_norm = 0.0;
    while (true) {
        std::vector<int> free;
        grad_norm = 0.0;
        for (int j = 0; j < p; ++j) {
            if (box.at_bound(theta, j, e.gradient[j])) continue;
            free.push_back(j);
            grad_norm = std::max(grad_norm, std::abs(e.gradient[j]));
        }
        if (!std::isfinite(grad_norm)) throw OptimizationError("qmle: non-finite gradient");
        if (grad_norm <= opts.gradient_tolerance * (1.0 + std::abs(e.value))) {
            r.converged = true;
            break;
        }
        if (r.iterations >= opts.max_iterations) break;

        const auto k = static_cast<Eigen::Index>(free.size());
        Matrix a(k, k);
        Vector g(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            g[i] = e.gradient[free[static_cast<std::size_t>(i)]];
            for (Eigen::Index l = 0; l < k; ++l) {
                a(i, l) = -e.hessian(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(l)]);
            }
        }
        const Vector step_free = ridge_solve(a, g, opts.ridge_start);
        Vector step = Vector::Zero(p);
        for (Eigen::Index i = 0; i < k; ++i) step[free[static_cast<std::size_t>(i)]] = step_free[i];

        bool accepted = false;
        Vector candidate;
        for (double t = 1.0; t >= opts.step_floor; t *= 0.5) {
            candidate = box.project(theta + t * step);
            const double value = safe_value(objective, candidate);
            if (value >= e.value + opts.armijo * e.gradient.dot(candidate - theta)) {
                accepted = true;
                break;
            }
            // Near the optimum the change in H drowns in rounding; take the
            // full step when it still shrinks the gradient.
            if (t == 1.0 && value >= e.value - value_noise(e.value) &&
                projected_gradient_norm(box, candidate, objective.gradient(candidate)) < grad_norm) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        theta = candidate;
        e = objective.evaluate(theta, Order::Hessian);
        ++r.iterations;
    }

    r.theta_hat = theta;
    r.objective = e.value;
    r.grad_norm = grad_norm;
    r.active_set = nonzero_indices(theta);
    r.wall_seconds = seconds_since(start);
    return r;
}

// ---------------------------------------------------------------------------

EstimationResult penalized_qmle(const Objective& objective, const Box& box, const PenaltySpec& penalty, double n,
                                const Vector& theta_init, const LqaOptions& opts, const RateSpec* rates) {
    const auto start = Clock::now();
    penalty.validate();
    check_start(objective, box, theta_init, "penalized_qmle");
    const int p = objective.dim();
    const RateSpec rate_spec = rates != nullptr ? *rates : RateSpec::standard(p);
    const Vector xi = penalty.weights(n, rate_spec);
    if (xi.size() != p) throw ArgumentError("penalized_qmle: weight dimension differs from objective");
    if (!opts.clamp_zero.empty() && static_cast<int>(opts.clamp_zero.size()) != p) {
        throw ArgumentError("penalized_qmle: clamp mask has wrong dimension");
    }
    const double q = penalty.q;
    const double tau = opts.deletion_threshold;

    EstimationResult r;
    r.method = Method::Penalized;
    r.theta_init = theta_init;

    auto pen = [&](const Vector& t) {
        double acc = 0.0;
        for (int j = 0; j < p; ++j) {
            if (t[j] != 0.0 && xi[j] != 0.0) acc += xi[j] * penalty.unit(t[j]);
        }
        return acc;
    };
    auto total = [&](const Vector& t) {
        const double v = safe_value(objective, t);
        return v == kNegInf ? kNegInf : v - pen(t);
    };

    Vector theta = theta_init;
    std::vector<bool> active(static_cast<std::size_t>(p), true);
    for (int j = 0; j < p; ++j) {
        const bool clamped = !opts.clamp_zero.empty() && opts.clamp_zero[static_cast<std::size_t>(j)];
        if (clamped) {
            if (!box[j].contains(0.0)) throw DomainError("penalized_qmle: clamped coordinate 0 lies outside the box");
            theta[j] = 0.0;
            active[static_cast<std::size_t>(j)] = false;
        } else if (xi[j] > 0.0 && theta[j] == 0.0) {
            active[static_cast<std::size_t>(j)] = false;
        }
    }
    double current = total(theta);
    if (!std::isfinite(current)) throw OptimizationError("penalized_qmle: objective is not finite at the start");

    auto deletable = [&](int j, double value) {
        return active[static_cast<std::size_t>(j)] && xi[j] > 0.0 && std::abs(value) < tau;
    };

    // Start-up deletion, kept only if it does not lower the objective.
    {
        Vector candidate = theta;
        bool any = false;
        for (int j = 0; j < p; ++j) {
            if (deletable(j, theta[j])) {
                candidate[j] = 0.0;
                any = true;
            }
        }
        const double value = any ? total(candidate) : kNegInf;
        if (any && value >= current) {
            for (int j = 0; j < p; ++j) {
                if (deletable(j, theta[j])) active[static_cast<std::size_t>(j)] = false;
            }
            theta = candidate;
            current = value;
        }
    }

    struct Direction {
        std::vector<int> free;
        Vector gradient;  // of the penalized objective, on `free`
    };

    // Gradient of the penalized objective at `at` over active coordinates not
    // held by a bound. `curvature` is filled with the system matrix for the step.
    auto direction = [&](const Vector& at, const Evaluation& e, bool exact, Matrix* curvature) {
        Direction dir;
        std::vector<double> d_all;
        for (int j = 0; j < p; ++j) {
            if (!active[static_cast<std::size_t>(j)]) continue;
            const double curv = xi[j] > 0.0 ? xi[j] * q * std::pow(std::abs(at[j]), q - 2.0) : 0.0;
            const double g = e.gradient[j] - curv * at[j];
            if (box.at_bound(at, j, g)) continue;
            dir.free.push_back(j);
            d_all.push_back(curv);
        }
        const auto k = static_cast<Eigen::Index>(dir.free.size());
        dir.gradient.resize(k);
        if (curvature != nullptr) curvature->resize(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const int j = dir.free[static_cast<std::size_t>(i)];
            const double curv = d_all[static_cast<std::size_t>(i)];
            dir.gradient[i] = e.gradient[j] - curv * at[j];
            if (curvature == nullptr) continue;
            for (Eigen::Index l = 0; l < k; ++l) (*curvature)(i, l) = -e.hessian(j, dir.free[static_cast<std::size_t>(l)]);
            // LQA majorant adds +D; the exact Hessian of -xi|x|^q adds -(1-q) D.
            (*curvature)(i, i) += exact ? -(1.0 - q) * curv : curv;
        }
        return dir;
    };

    struct StepOutcome {
        bool accepted = false;
        double change = 0.0;
    };

    auto any_active = [&] {
        for (bool a : active) {
            if (a) return true;
        }
        return false;
    };

    auto gradient_norm = [&](const Vector& at) {
        if (!any_active()) return 0.0;
        const Evaluation e = objective.evaluate(at, Order::Gradient);
        const Direction dir = direction(at, e, false, nullptr);
        return dir.gradient.size() == 0 ? 0.0 : dir.gradient.cwiseAbs().maxCoeff();
    };

    auto take_step = [&](bool exact) {
        StepOutcome out;
        const Evaluation e = objective.evaluate(theta, Order::Hessian);
        Matrix m;
        const Direction dir = direction(theta, e, exact, &m);
        if (dir.free.empty()) return out;
        const Vector d = ridge_solve(m, dir.gradient, opts.ridge_start);
        for (double t = 1.0; t >= opts.step_floor; t *= 0.5) {
            Vector candidate = theta;
            for (std::size_t i = 0; i < dir.free.size(); ++i) {
                candidate[dir.free[i]] += t * d[static_cast<Eigen::Index>(i)];
            }
            candidate = box.project(candidate);
            for (int j = 0; j < p; ++j) {
                if (deletable(j, candidate[j])) candidate[j] = 0.0;
            }
            const double value = total(candidate);
            bool accept = value >= current;
            // Full step inside rounding noise of the objective: accept when
            // it shrinks the gradient and deletes nothing.
            if (!accept && t == 1.0 && value >= current - value_noise(current)) {
                bool deletes = false;
                for (int j = 0; j < p; ++j) deletes = deletes || (theta[j] != 0.0 && candidate[j] == 0.0);
                accept = !deletes && gradient_norm(candidate) < gradient_norm(theta);
            }
            if (accept) {
                out.accepted = true;
                out.change = (candidate - theta).cwiseAbs().maxCoeff();
                for (int j = 0; j < p; ++j) {
                    if (active[static_cast<std::size_t>(j)] && xi[j] > 0.0 && candidate[j] == 0.0) {
                        active[static_cast<std::size_t>(j)] = false;
                    }
                }
                theta = candidate;
                current = value;
                return out;
            }
        }
        return out;
    };

    while (r.iterations < opts.max_iterations && any_active()) {
        const StepOutcome s = take_step(false);
        if (!s.accepted) break;
        ++r.iterations;
        if (s.change < opts.step_tolerance) break;
    }

    double grad_norm = gradient_norm(theta);
    for (int k = 0; k < opts.polish_iterations && any_active(); ++k) {
        if (grad_norm <= opts.gradient_tolerance * (1.0 + std::abs(current))) break;
        const StepOutcome s = take_step(true);
        if (!s.accepted) break;
        ++r.iterations;
        grad_norm = gradient_norm(theta);
    }

    r.theta_hat = theta;
    r.objective = current;
    r.grad_norm = grad_norm;
    r.converged = grad_norm <= opts.gradient_tolerance * (1.0 + std::abs(current));
    r.active_set = nonzero_indices(theta);
    r.wall_seconds = seconds_since(start);
    return r;
}

// ---------------------------------------------------------------------------

double effective_sample_size(const std::vector<double>& chain) {
    const std::size_t n = chain.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : chain) mean += v;
    mean /= static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) acc += (chain[i] - mean) * (chain[i + lag] - mean);
        return acc / static_cast<double>(n);
    };
    const double gamma0 = autocov(0);
    if (!(gamma0 > 0.0)) return 1.0;

    double tau = -1.0;
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / gamma0;
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

EstimationResult qbe(const Objective& objective, const Box& box, const Vector& start, const McmcOptions& opts) {
    const auto clock_start = Clock::now();
    check_start(objective, box, start, "qbe");
    if (opts.iterations < 1 || opts.burn_in < 0 || opts.burn_in >= opts.iterations || opts.adaptation < 0 ||
        opts.adaptation > opts.burn_in || !(opts.scale >= 0.0)) {
        throw ArgumentError("qbe: need 0 <= adaptation <= burn_in < iterations and scale >= 0");
    }
    const int p = objective.dim();

    // Proposal scale from the curvature at the start point.
    const Evaluation e0 = objective.evaluate(start, Order::Hessian);
    Vector base_scale(p);
    {
        const Matrix info = -0.5 * (e0.hessian + e0.hessian.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
        const bool pd = eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
        if (pd) {
            const Matrix inv_sqrt = eig.operatorInverseSqrt();
            base_scale = inv_sqrt.diagonal();
        } else {
            for (int j = 0; j < p; ++j) {
                const double c = std::abs(info(j, j));
                base_scale[j] = c > 0.0 ? 1.0 / std::sqrt(c) : box[j].length() / 100.0;
            }
        }
        base_scale *= 2.4 / std::sqrt(static_cast<double>(p)) * opts.scale;
    }

    std::mt19937_64 gen(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vector theta = start;
    double value = safe_value(objective, theta);
    if (value == kNegInf) throw OptimizationError("qbe: objective is not finite at the start");

    double multiplier = 1.0;
    int batch_accepts = 0;
    int batch_size = 0;
    long post_adapt_accepts = 0;
    long post_adapt_steps = 0;
    const int kept = opts.iterations - opts.burn_in;
    std::vector<std::vector<double>> chains(static_cast<std::size_t>(p));
    for (auto& c : chains) c.reserve(static_cast<std::size_t>(kept));

    Vector proposal(p);
    for (int it = 0; it < opts.iterations; ++it) {
        for (int j = 0; j < p; ++j) proposal[j] = theta[j] + multiplier * base_scale[j] * normal(gen);
        bool accept = false;
        double proposed_value = kNegInf;
        if (box.contains(proposal)) {
            proposed_value = safe_value(objective, proposal);
            const double log_ratio = proposed_value - value;
            accept = proposed_value != kNegInf && std::log(unif(gen)) < log_ratio;
        }
        if (accept) {
            theta = proposal;
            value = proposed_value;
        }

        if (it < opts.adaptation) {
            batch_accepts += accept ? 1 : 0;
            if (++batch_size == 100) {
                const double rate = batch_accepts / 100.0;
                multiplier *= std::exp(2.0 * (rate - opts.target_acceptance));
                batch_accepts = 0;
                batch_size = 0;
            }
        } else {
            post_adapt_accepts += accept ? 1 : 0;
            ++post_adapt_steps;
        }
        if (it >= opts.burn_in) {
            for (int j = 0; j < p; ++j) chains[static_cast<std::size_t>(j)].push_back(theta[j]);
        }
    }

    EstimationResult r;
    r.method = Method::Qbe;
    r.theta_init = start;
    r.iterations = opts.iterations;
    McmcDiagnostics diag;
    diag.acceptance_rate =
        post_adapt_steps > 0 ? static_cast<double>(post_adapt_accepts) / static_cast<double>(post_adapt_steps) : 0.0;
    diag.ess.resize(p);
    diag.posterior_sd.resize(p);
    diag.mc_stderr.resize(p);
    r.theta_hat.resize(p);
    for (int j = 0; j < p; ++j) {
        const auto& c = chains[static_cast<std::size_t>(j)];
        double mean = 0.0;
        for (double v : c) mean += v;
        mean /= static_cast<double>(c.size());
        double var = 0.0;
        for (double v : c) var += (v - mean) * (v - mean);
        var /= std::max<double>(1.0, static_cast<double>(c.size()) - 1.0);
        r.theta_hat[j] = mean;
        diag.posterior_sd[j] = std::sqrt(var);
        diag.ess[j] = effective_sample_size(c);
        diag.mc_stderr[j] = diag.posterior_sd[j] / std::sqrt(diag.ess[j]);
    }
    diag.min_ess = diag.ess.minCoeff();
    diag.passed = diag.acceptance_rate >= 0.05 && diag.acceptance_rate <= 0.95;

    r.theta_hat = box.project(r.theta_hat);
    const double final_value = safe_value(objective, r.theta_hat);
    r.objective = final_value;
    if (final_value != kNegInf) r.grad_norm = objective.gradient(r.theta_hat).cwiseAbs().maxCoeff();
    r.converged = diag.passed;
    r.mcmc = std::move(diag);
    r.active_set = nonzero_indices(r.theta_hat);
    r.wall_seconds = seconds_since(clock_start);
    return r;
}

}  // namespace pqla
