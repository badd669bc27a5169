#pragma once

#include <cmath>

#include "pqla/sde_core.hpp"

namespace testing {

// n = 3, T = 1.5, d = 2; reference values below were computed independently.
inline pqla::Dataset tiny_dataset() {
    pqla::Dataset ds;
    ds.n = 3;
    ds.times = pqla::Vector::LinSpaced(4, 0.0, 1.5);
    ds.x.resize(4, 2);
    ds.x << 0.0, 0.3, 0.7, -0.4, 1.2, 0.1, 0.0, 0.0;
    ds.y.resize(4, 1);
    ds.y << 0.0, 0.4, -0.1, 0.5;
    ds.provenance = "test";
    return ds;
}

// X frozen at pi/2 so sin X = 1 and log S = 2 theta.
inline pqla::ModelSpec frozen_model(int p = 1, double bound = 5.0) {
    pqla::ModelSpec spec = pqla::volatility_regression_model(p, 1.0, bound);
    spec.covariate_diffusion = std::make_shared<pqla::ConstantDiffusion>(0.0);
    spec.x0 = pqla::Vector::Constant(p, std::acos(0.0));
    return spec;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testing
