#include "pqla/objective.hpp"

namespace pqla {

QuadraticObjective::QuadraticObjective(Vector vertex, Matrix precision, double offset)
    : vertex_(std::move(vertex)), precision_(std::move(precision)), offset_(offset) {
    if (precision_.rows() != vertex_.size() || precision_.cols() != vertex_.size()) {
        throw ArgumentError("quadratic objective: precision must be p x p");
    }
}

Evaluation QuadraticObjective::evaluate(const Vector& theta, Order order) const {
    const Vector diff = theta - vertex_;
    const Vector pd = precision_ * diff;
    Evaluation e;
    e.value = offset_ - 0.5 * diff.dot(pd);
    if (order >= Order::Gradient) e.gradient = -pd;
    if (order >= Order::Hessian) e.hessian = -precision_;
    return e;
}

RestrictedObjective::RestrictedObjective(const Objective& base, std::vector<bool> fixed, Vector values)
    : base_(base), values_(std::move(values)) {
    if (static_cast<int>(fixed.size()) != base.dim() || values_.size() != base.dim()) {
        throw ArgumentError("restricted objective: mask and values must have the base dimension");
    }
    for (int j = 0; j < base.dim(); ++j) {
        if (!fixed[static_cast<std::size_t>(j)]) free_.push_back(j);
    }
}

Vector RestrictedObjective::embed(const Vector& free_theta) const {
    Vector full = values_;
    for (std::size_t i = 0; i < free_.size(); ++i) full[free_[i]] = free_theta[static_cast<Eigen::Index>(i)];
    return full;
}

Vector RestrictedObjective::restrict(const Vector& full_theta) const {
    Vector out(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t i = 0; i < free_.size(); ++i) out[static_cast<Eigen::Index>(i)] = full_theta[free_[i]];
    return out;
}

Evaluation RestrictedObjective::evaluate(const Vector& theta, Order order) const {
    const Evaluation full = base_.evaluate(embed(theta), order);
    Evaluation e;
    e.value = full.value;
    const auto k = static_cast<Eigen::Index>(free_.size());
    if (order >= Order::Gradient) {
        e.gradient.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) e.gradient[i] = full.gradient[free_[static_cast<std::size_t>(i)]];
    }
    if (order >= Order::Hessian) {
        e.hessian.resize(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) {
                e.hessian(i, j) = full.hessian(free_[static_cast<std::size_t>(i)], free_[static_cast<std::size_t>(j)]);
            }
        }
    }
    return e;
}

}  // namespace pqla
