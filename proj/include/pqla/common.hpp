#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pqla {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library. The C API maps each
/// subclass onto one status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or invalid arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the documented precondition of an operation.
class ArgumentError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Non-finite values produced while stepping a discretized SDE.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Malformed or invalid input data (dataset files, grids).
class DataError : public Error {
public:
    using Error::Error;
};

/// Parse failure at a specific line of a text file.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A point lies outside the parameter domain (closed box, or U_n).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Objective could not be evaluated (non-positive variance etc.).
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::size_t index)
        : Error(what + " at observation " + std::to_string(index)), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Optimizer failures other than plain non-convergence.
class OptimizationError : public Error {
public:
    using Error::Error;
};

class NonIdentifiableError : public OptimizationError {
public:
    using OptimizationError::OptimizationError;
};

/// Closed interval [lo, hi] of one parameter coordinate.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    double clamp(double x) const noexcept { return x < lo ? lo : (x > hi ? hi : x); }
};

/// Axis-aligned parameter box. Theta is the open box, its closure is what
/// estimators search over.
class Box {
public:
    Box() = default;
    explicit Box(std::vector<Interval> bounds);
    static Box uniform(int p, double lo, double hi);

    int dim() const noexcept { return static_cast<int>(bounds_.size()); }
    const Interval& operator[](int j) const { return bounds_.at(static_cast<std::size_t>(j)); }
    const std::vector<Interval>& bounds() const noexcept { return bounds_; }

    bool contains(const Vector& theta) const;
    Vector project(const Vector& theta) const;
    /// True when coordinate j sits on a bound and `direction` points outward.
    bool at_bound(const Vector& theta, int j, double direction) const;

private:
    std::vector<Interval> bounds_;
};

/// splitmix64 finalizer; the building block for order-independent seed
/// derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for replication `index` at sample size `n` of a study seeded by
/// `master`. Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n, std::uint64_t index) noexcept;

/// Format with 17 significant digits (round-trip exact for doubles).
std::string format_double(double x);

}  // namespace pqla
