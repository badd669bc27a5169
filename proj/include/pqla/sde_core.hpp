#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "pqla/common.hpp"

namespace pqla {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * Volatility family for a scalar observed process (m = 1).
 *
 * Families are described through the log-variance
 * ell(x, theta) = log S(x, theta) = 2 log|sigma(x, theta)|, which is what the
 * quasi log-likelihood and its limit quantities actually consume. The default
 * derivative implementation uses central finite differences of ell; built-in
 * families override it with closed forms.
 */
class VolatilityFamily {
public:
    virtual ~VolatilityFamily() = default;

    virtual std::string name() const = 0;
    /// sigma(x, theta); used by the simulator.
    virtual double sigma(std::span<const double> x, const Vector& theta) const = 0;
    virtual double log_variance(std::span<const double> x, const Vector& theta) const;
    /// Gradient and (when `hess` is non-null) Hessian of log_variance in theta.
    virtual void log_variance_derivatives(std::span<const double> x, const Vector& theta,
                                          Vector& grad, Matrix* hess) const;
    /// False when sigma does not depend on theta at all.
    virtual bool depends_on_theta() const { return true; }
    /// Families with log S(x, theta) = phi(x)' theta fill phi and return true.
    virtual bool log_linear_features(std::span<const double>, Vector&) const { return false; }
};

/// sigma(x, theta) = exp(sum_k theta_k sin(x_k)) over the first p covariates.
class SinExpVolatility final : public VolatilityFamily {
public:
    std::string name() const override { return "sin-exp"; }
    double sigma(std::span<const double> x, const Vector& theta) const override;
    double log_variance(std::span<const double> x, const Vector& theta) const override;
    void log_variance_derivatives(std::span<const double> x, const Vector& theta, Vector& grad,
                                  Matrix* hess) const override;
    /// Needs `phi` pre-sized to p.
    bool log_linear_features(std::span<const double> x, Vector& phi) const override;
};

/// sigma = c for every (x, theta).
class ConstantVolatility final : public VolatilityFamily {
public:
    explicit ConstantVolatility(double c) : c_(c) {}
    std::string name() const override;
    double sigma(std::span<const double>, const Vector&) const override { return c_; }
    double log_variance(std::span<const double>, const Vector&) const override;
    void log_variance_derivatives(std::span<const double> x, const Vector& theta, Vector& grad,
                                  Matrix* hess) const override;
    bool depends_on_theta() const override { return false; }
    double value() const noexcept { return c_; }

private:
    double c_;
};

/// User-supplied sigma; derivatives by central finite differences.
class FunctionVolatility final : public VolatilityFamily {
public:
    using Fn = std::function<double(std::span<const double>, const Vector&)>;
    FunctionVolatility(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    double sigma(std::span<const double> x, const Vector& theta) const override { return fn_(x, theta); }

private:
    std::string name_;
    Fn fn_;
};

/// Diffusion coefficient of covariate k (1-based) driven by its own Wiener
/// process: dX^k_t = a_k(t, X^k_t) dw^k_t.
class CovariateDiffusion {
public:
    virtual ~CovariateDiffusion() = default;
    virtual std::string name() const = 0;
    virtual double coefficient(int k, double t, double x) const = 0;
};

/// a_k(t, x) = sin(2 k pi t) / (1 + x^2).
class SinePeriodicDiffusion final : public CovariateDiffusion {
public:
    std::string name() const override { return "sin2kpi"; }
    double coefficient(int k, double t, double x) const override;
};

class ConstantDiffusion final : public CovariateDiffusion {
public:
    explicit ConstantDiffusion(double c) : c_(c) {}
    std::string name() const override;
    double coefficient(int, double, double) const override { return c_; }

private:
    double c_;
};

/// Drift of Y as a function of (t, y). An empty function means zero drift.
using DriftFunction = std::function<double(double t, double y)>;

struct ModelSpec {
    int p = 1;
    int d = 1;
    int m = 1;
    double horizon = 1.0;
    Box theta_box;
    std::shared_ptr<const VolatilityFamily> volatility;
    std::shared_ptr<const CovariateDiffusion> covariate_diffusion;
    std::string drift_name = "zero";
    DriftFunction drift;
    Vector x0;  // empty means all zeros
    double y0 = 0.0;

    /// Throws ConfigError on violated invariants.
    void validate() const;
    Vector initial_covariates() const;
};

/// The volatility regression experiment: p = d, sin-exp volatility,
/// sin(2k pi t)/(1 + x^2) covariate diffusions, zero drift, Theta = (-bound, bound)^p.
ModelSpec volatility_regression_model(int d, double horizon = 1.0, double theta_bound = 5.0);

struct PathBundle {
    int n = 0;
    int refinement = 1;
    double horizon = 1.0;
    double fine_step = 0.0;
    RowMatrix x_fine;  ///< (n * refinement + 1) x d
    /// (n * refinement) x (d + 1); column 0 drives Y, column k drives X^k.
    Matrix wiener;
    std::optional<std::uint64_t> seed;

    Eigen::Index fine_points() const { return x_fine.rows(); }
    std::span<const double> covariates_at(Eigen::Index i) const {
        return {x_fine.data() + i * x_fine.cols(), static_cast<std::size_t>(x_fine.cols())};
    }
};

/// Euler-Maruyama paths on the fine grid, deterministic given the seed.
PathBundle simulate_paths(const ModelSpec& spec, int n, int refinement, std::uint64_t seed);

/// Same scheme driven by prescribed Wiener increments of shape
/// (n * refinement) x (d + 1).
PathBundle simulate_paths(const ModelSpec& spec, int n, int refinement, Matrix increments);

struct Dataset {
    int n = 0;
    Vector times;  ///< n + 1 points
    RowMatrix x;   ///< (n + 1) x d
    RowMatrix y;   ///< (n + 1) x m
    std::string provenance;

    int d() const { return static_cast<int>(x.cols()); }
    int m() const { return static_cast<int>(y.cols()); }
    double horizon() const { return times[n] - times[0]; }
    double step() const { return horizon() / n; }
    std::span<const double> covariates_at(Eigen::Index j) const {
        return {x.data() + j * x.cols(), static_cast<std::size_t>(x.cols())};
    }

    /// Throws DataError when the grid is not uniform and increasing, entries
    /// are not finite, or n < min_n.
    void validate(int min_n = 1) const;
    /// Keep every `factor`-th observation; n must be divisible by factor.
    Dataset subsample(int factor) const;
};

/// Accumulate Y on the fine grid and subsample X and Y to the n + 1
/// observation times.
Dataset simulate_observation(const ModelSpec& spec, const Vector& theta_star, const PathBundle& paths);

/// Headered CSV `t,x1..xd,y1..ym`, 17 significant digits.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace pqla
