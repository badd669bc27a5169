#pragma once

#include <memory>
#include <vector>

#include "pqla/common.hpp"

namespace pqla {

/// Value and (optionally) derivatives of a smooth objective at one point.
struct Evaluation {
    double value = 0.0;
    Vector gradient;
    Matrix hessian;
};

/// Derivative order requested from Objective::evaluate.
enum class Order { Value = 0, Gradient = 1, Hessian = 2 };

/// A smooth contrast to be maximized over a parameter box.
class Objective {
public:
    virtual ~Objective() = default;

    virtual int dim() const = 0;
    virtual Evaluation evaluate(const Vector& theta, Order order) const = 0;
    /// False when the objective is constant in theta.
    virtual bool depends_on_theta() const { return true; }

    double value(const Vector& theta) const { return evaluate(theta, Order::Value).value; }
    Vector gradient(const Vector& theta) const { return evaluate(theta, Order::Gradient).gradient; }
    Matrix hessian(const Vector& theta) const { return evaluate(theta, Order::Hessian).hessian; }
};

/// H(theta) = offset - 1/2 (theta - vertex)' precision (theta - vertex).
class QuadraticObjective final : public Objective {
public:
    QuadraticObjective(Vector vertex, Matrix precision, double offset = 0.0);

    int dim() const override { return static_cast<int>(vertex_.size()); }
    Evaluation evaluate(const Vector& theta, Order order) const override;

    const Vector& vertex() const noexcept { return vertex_; }
    const Matrix& precision() const noexcept { return precision_; }

private:
    Vector vertex_;
    Matrix precision_;
    double offset_;
};

/// View of an objective with some coordinates held at fixed values. The free
/// coordinates keep their original order.
class RestrictedObjective final : public Objective {
public:
    /// `fixed[j]` marks coordinate j as held at `values[j]`.
    RestrictedObjective(const Objective& base, std::vector<bool> fixed, Vector values);

    int dim() const override { return static_cast<int>(free_.size()); }
    Evaluation evaluate(const Vector& theta, Order order) const override;
    bool depends_on_theta() const override { return base_.depends_on_theta(); }

    Vector embed(const Vector& free_theta) const;
    Vector restrict(const Vector& full_theta) const;
    const std::vector<int>& free_indices() const noexcept { return free_; }

private:
    const Objective& base_;
    std::vector<int> free_;
    Vector values_;
};

}  // namespace pqla
