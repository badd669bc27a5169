#include "pqla/quasi_likelihood.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace pqla {

QuasiLikelihood::QuasiLikelihood(const Dataset& ds, const ModelSpec& spec)
    : p_(spec.p), n_(ds.n), volatility_(spec.volatility) {
    spec.validate();
    ds.validate(spec.p + 1);
    if (ds.d() != spec.d) throw DataError("dataset has " + std::to_string(ds.d()) + " covariates, model expects " +
                                          std::to_string(spec.d));
    if (ds.m() != 1) throw DataError("only scalar observations (m = 1) are supported");

    const double h = ds.step();
    x_ = ds.x.topRows(ds.n);
    features_.resize(ds.n, spec.p);
    linear_ = true;
    Vector row(spec.p);
    for (int j = 0; j < ds.n && linear_; ++j) {
        linear_ = volatility_->log_linear_features(ds.covariates_at(j), row);
        if (linear_) features_.row(j) = row.transpose();
    }
    if (!linear_) features_.resize(0, 0);
    scaled_sq_.resize(ds.n);
    for (int j = 1; j <= ds.n; ++j) {
        const double dy = ds.y(j, 0) - ds.y(j - 1, 0);
        scaled_sq_[j - 1] = dy * dy / h;
    }
}

Evaluation QuasiLikelihood::evaluate(const Vector& theta, Order order) const {
    if (theta.size() != p_) throw ArgumentError("quasi likelihood: theta has wrong dimension");
    const bool want_grad = order >= Order::Gradient;
    const bool want_hess = order >= Order::Hessian;

    Evaluation e;
    if (linear_) {
        const Vector ell = features_ * theta;
        const Vector w = (-ell.array()).exp() * scaled_sq_.array();
        for (int j = 0; j < n_; ++j) {
            if (!std::isfinite(ell[j]) || !std::isfinite(w[j])) {
                throw EvaluationError("conditional variance is not positive and finite",
                                      static_cast<std::size_t>(j + 1));
            }
        }
        e.value = -0.5 * (ell.sum() + w.sum());
        if (want_grad) e.gradient = -0.5 * features_.transpose() * (1.0 - w.array()).matrix();
        if (want_hess) {
            e.hessian = -0.5 * features_.transpose() * (w.asDiagonal() * features_);
            e.hessian = 0.5 * (e.hessian + e.hessian.transpose()).eval();
        }
        return e;
    }

    double value = 0.0;
    Vector grad_acc = Vector::Zero(p_);
    Matrix hess_acc = Matrix::Zero(p_, p_);
    Vector g(p_);
    Matrix lh(p_, p_);

    const std::size_t d = static_cast<std::size_t>(x_.cols());
    for (int j = 0; j < n_; ++j) {
        const std::span<const double> x(x_.data() + static_cast<std::ptrdiff_t>(j) * x_.cols(), d);
        const double ell = volatility_->log_variance(x, theta);
        const double w = std::exp(-ell) * scaled_sq_[j];
        if (!std::isfinite(ell) || !std::isfinite(w)) {
            throw EvaluationError("conditional variance is not positive and finite", static_cast<std::size_t>(j + 1));
        }
        value -= 0.5 * (ell + w);
        if (!want_grad) continue;

        volatility_->log_variance_derivatives(x, theta, g, want_hess ? &lh : nullptr);
        grad_acc.noalias() -= 0.5 * (1.0 - w) * g;
        if (want_hess) {
            hess_acc.noalias() -= 0.5 * (1.0 - w) * lh;
            hess_acc.selfadjointView<Eigen::Lower>().rankUpdate(g, -0.5 * w);
        }
    }

    e.value = value;
    if (want_grad) e.gradient = std::move(grad_acc);
    if (want_hess) {
        // rankUpdate only fills the lower triangle.
        e.hessian = hess_acc.selfadjointView<Eigen::Lower>();
    }
    return e;
}

double quasi_loglik(const Dataset& ds, const ModelSpec& spec, const Vector& theta) {
    return QuasiLikelihood(ds, spec).value(theta);
}

Vector quasi_score(const Dataset& ds, const ModelSpec& spec, const Vector& theta) {
    return QuasiLikelihood(ds, spec).gradient(theta);
}

Matrix quasi_hessian(const Dataset& ds, const ModelSpec& spec, const Vector& theta) {
    return QuasiLikelihood(ds, spec).hessian(theta);
}

// ---------------------------------------------------------------------------

RateSpec RateSpec::standard(int p) {
    return RateSpec{Vector::Ones(p), Vector::Constant(p, 0.5)};
}

Vector RateSpec::alpha(double n) const {
    Vector out(coefficient.size());
    for (Eigen::Index j = 0; j < coefficient.size(); ++j) out[j] = coefficient[j] * std::pow(n, -exponent[j]);
    return out;
}

void RateSpec::validate() const {
    if (coefficient.size() != exponent.size() || coefficient.size() == 0) {
        throw ConfigError("rate spec: coefficient and exponent must be non-empty and equally long");
    }
    for (Eigen::Index j = 0; j < coefficient.size(); ++j) {
        if (!(coefficient[j] > 0.0)) throw ConfigError("rate spec: coefficients must be positive");
        if (!(exponent[j] > 0.0)) throw ConfigError("rate spec: exponents must be positive so that a_n -> 0");
    }
}

LaqDecomposition laq_decompose(const Objective& objective, const Vector& theta_star, const RateSpec& rates,
                               double n, const Matrix* limit_gamma) {
    rates.validate();
    if (rates.dim() != objective.dim() || theta_star.size() != objective.dim()) {
        throw ArgumentError("laq_decompose: dimension mismatch");
    }
    const Evaluation at_star = objective.evaluate(theta_star, Order::Hessian);

    LaqDecomposition laq;
    laq.theta_star = theta_star;
    laq.a = rates.a(n);
    laq.delta = laq.a * at_star.gradient;
    laq.gamma = -laq.a * at_star.hessian * laq.a;
    laq.gamma = 0.5 * (laq.gamma + laq.gamma.transpose()).eval();
    laq.reference_gamma = limit_gamma != nullptr ? *limit_gamma : laq.gamma;

    const double base = at_star.value;
    laq.remainder = [&objective, base, star = laq.theta_star, a = laq.a, delta = laq.delta,
                     ref = laq.reference_gamma](const Vector& u) {
        if (u.isZero(0.0)) return 0.0;
        const double increment = objective.value(star + a * u) - base;
        return increment - delta.dot(u) + 0.5 * u.dot(ref * u);
    };
    return laq;
}

// ---------------------------------------------------------------------------
// Limit quantities on the fine grid

namespace {

void check_paths(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star) {
    spec.validate();
    if (paths.x_fine.cols() != spec.d) throw ArgumentError("path bundle does not match the model's d");
    if (paths.x_fine.rows() < 2) throw ArgumentError("path bundle has no fine steps");
    if (theta_star.size() != spec.p) throw ArgumentError("theta_star has wrong dimension");
}

// x + exp(-x) - 1, accurate near zero.
double divergence_kernel(double x) { return x + std::expm1(-x); }

class LimitContrast {
public:
    LimitContrast(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star)
        : paths_(paths), spec_(spec), steps_(paths.x_fine.rows() - 1), ell_star_(steps_) {
        for (Eigen::Index i = 0; i < steps_; ++i) {
            ell_star_[i] = spec.volatility->log_variance(paths.covariates_at(i), theta_star);
            if (!std::isfinite(ell_star_[i])) {
                throw EvaluationError("conditional variance is not positive along the path",
                                      static_cast<std::size_t>(i));
            }
        }
    }

    // -Y(theta) >= 0.
    double neg_contrast(const Vector& theta) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < steps_; ++i) {
            const double ell = spec_.volatility->log_variance(paths_.covariates_at(i), theta);
            if (!std::isfinite(ell)) {
                throw EvaluationError("conditional variance is not positive along the path",
                                      static_cast<std::size_t>(i));
            }
            acc += divergence_kernel(ell - ell_star_[i]);
        }
        return acc * paths_.fine_step / (2.0 * paths_.horizon);
    }

private:
    const PathBundle& paths_;
    const ModelSpec& spec_;
    Eigen::Index steps_;
    Vector ell_star_;
};

}  // namespace

LimitInformation limit_information(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star) {
    check_paths(paths, spec, theta_star);
    const Eigen::Index steps = paths.x_fine.rows() - 1;
    Matrix gamma = Matrix::Zero(spec.p, spec.p);
    Vector g(spec.p);
    for (Eigen::Index i = 0; i < steps; ++i) {
        const auto x = paths.covariates_at(i);
        const double ell = spec.volatility->log_variance(x, theta_star);
        if (!std::isfinite(ell)) {
            throw EvaluationError("conditional variance is not positive along the path", static_cast<std::size_t>(i));
        }
        spec.volatility->log_variance_derivatives(x, theta_star, g, nullptr);
        gamma.selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0);
    }
    gamma = gamma.selfadjointView<Eigen::Lower>();
    // For scalar S, (dS S^{-1}) = d log S, so the trace is (g'u)^2.
    gamma *= paths.fine_step / (2.0 * paths.horizon);

    LimitInformation info;
    info.gamma = gamma;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma, Eigen::EigenvaluesOnly);
    const double largest = eig.eigenvalues().maxCoeff();
    info.degenerate = !(largest > 0.0) || eig.eigenvalues().minCoeff() < 1e-10 * largest;
    return info;
}

double limit_contrast(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star,
                      const Vector& theta) {
    check_paths(paths, spec, theta_star);
    if (theta.size() != spec.p) throw ArgumentError("theta has wrong dimension");
    return -LimitContrast(paths, spec, theta_star).neg_contrast(theta);
}

double chi0_estimate(const PathBundle& paths, const ModelSpec& spec, const Vector& theta_star, int budget,
                     std::uint64_t seed) {
    if (budget < 1) throw ArgumentError("chi0_estimate: budget must be >= 1");
    check_paths(paths, spec, theta_star);
    const LimitContrast contrast(paths, spec, theta_star);
    const Box& box = spec.theta_box;
    const int p = spec.p;

    auto quotient = [&](const Vector& theta) {
        const double dist2 = (theta - theta_star).squaredNorm();
        if (dist2 < 1e-24) return std::numeric_limits<double>::infinity();
        return contrast.neg_contrast(theta) / dist2;
    };

    // Limit along the softest direction as theta -> theta*.
    const LimitInformation info = limit_information(paths, spec, theta_star);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(info.gamma, Eigen::EigenvaluesOnly);
    double best = std::max(0.0, 0.5 * eig.eigenvalues().minCoeff());

    constexpr double kInvPhi = 0.6180339887498949;
    constexpr int kSweeps = 2;
    constexpr int kGoldenIterations = 40;

    std::mt19937_64 gen(seed);
    for (int start = 0; start < budget; ++start) {
        Vector theta(p);
        for (int j = 0; j < p; ++j) {
            std::uniform_real_distribution<double> unif(box[j].lo, box[j].hi);
            theta[j] = unif(gen);
        }
        double current = quotient(theta);
        for (int sweep = 0; sweep < kSweeps; ++sweep) {
            for (int j = 0; j < p; ++j) {
                double lo = box[j].lo;
                double hi = box[j].hi;
                Vector probe = theta;
                auto at = [&](double v) {
                    probe[j] = v;
                    return quotient(probe);
                };
                double c = hi - kInvPhi * (hi - lo);
                double dd = lo + kInvPhi * (hi - lo);
                double fc = at(c);
                double fd = at(dd);
                for (int it = 0; it < kGoldenIterations; ++it) {
                    if (fc < fd) {
                        hi = dd;
                        dd = c;
                        fd = fc;
                        c = hi - kInvPhi * (hi - lo);
                        fc = at(c);
                    } else {
                        lo = c;
                        c = dd;
                        fc = fd;
                        dd = lo + kInvPhi * (hi - lo);
                        fd = at(dd);
                    }
                }
                // Endpoints of the closed box are candidates too.
                const double candidates[] = {0.5 * (lo + hi), box[j].lo, box[j].hi};
                for (double v : candidates) {
                    const double f = at(v);
                    if (f < current) {
                        current = f;
                        theta[j] = v;
                    }
                }
            }
        }
        best = std::min(best, current);
    }
    return best;
}

}  // namespace pqla
