#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pqla/quasi_likelihood.hpp"

using namespace pqla;

TEST_CASE("quasi log-likelihood on a hand-built dataset") {
    const Dataset ds = testing::tiny_dataset();
    const ModelSpec spec = volatility_regression_model(2);
    Vector th(2);
    th << 0.3, -0.8;
    CHECK(quasi_loglik(ds, spec, th) == doctest::Approx(-1.0573834799613857).epsilon(1e-13));
    const Vector g = quasi_score(ds, spec, th);
    CHECK(g[0] == doctest::Approx(-1.00883177092).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(0.12306174562).epsilon(1e-9));
    const Matrix h = quasi_hessian(ds, spec, th);
    CHECK(h(0, 0) == doctest::Approx(-0.99016419).epsilon(1e-7));
    CHECK(h(0, 1) == doctest::Approx(0.00154621).epsilon(1e-5));
    CHECK(h(1, 0) == h(0, 1));
    CHECK(h(1, 1) == doctest::Approx(-0.15456156).epsilon(1e-7));
}

TEST_CASE("two unit increments: H = -(2 theta + exp(-2 theta))") {
    Dataset ds;
    ds.n = 2;
    ds.times = Vector::LinSpaced(3, 0.0, 1.0);
    ds.x = RowMatrix::Constant(3, 1, std::acos(0.0));
    ds.y.resize(3, 1);
    ds.y << 0.0, std::sqrt(0.5), 0.0;
    const ModelSpec spec = volatility_regression_model(1);
    for (double t : {-1.0, 0.0, 0.4, 2.5}) {
        CHECK(quasi_loglik(ds, spec, Vector::Constant(1, t)) ==
              doctest::Approx(-(2.0 * t + std::exp(-2.0 * t))).epsilon(1e-14));
    }
    ds.y << 0.0, std::sqrt(0.05), 0.0;
    CHECK(quasi_loglik(ds, spec, Vector::Zero(1)) == doctest::Approx(-0.1));
}

TEST_CASE("generic path agrees with the log-linear fast path") {
    const ModelSpec spec = volatility_regression_model(3);
    Vector th(3);
    th << 0.2, -0.4, 1.1;
    const Dataset ds = simulate_observation(spec, th, simulate_paths(spec, 300, 4, 5));
    ModelSpec generic = spec;
    generic.volatility = std::make_shared<FunctionVolatility>("sin-exp-fd", [](std::span<const double> x, const Vector& t) {
        double s = 0.0;
        for (int k = 0; k < t.size(); ++k) s += t[k] * std::sin(x[k]);
        return std::exp(s);
    });
    Vector probe(3);
    probe << 0.5, 0.1, -0.3;
    CHECK(quasi_loglik(ds, generic, probe) == doctest::Approx(quasi_loglik(ds, spec, probe)).epsilon(1e-12));
    const Vector ga = quasi_score(ds, spec, probe);
    const Vector gb = quasi_score(ds, generic, probe);
    CHECK((ga - gb).norm() / ga.norm() < 1e-6);
}

TEST_CASE("zero volatility is an evaluation error naming the observation") {
    Dataset ds = testing::tiny_dataset();
    ModelSpec spec = volatility_regression_model(2);
    spec.volatility = std::make_shared<ConstantVolatility>(0.0);
    try {
        quasi_loglik(ds, spec, Vector::Zero(2));
        FAIL("expected an evaluation error");
    } catch (const EvaluationError& e) {
        CHECK(e.index() == 1);
    }
}

TEST_CASE("dimension mismatches") {
    const Dataset ds = testing::tiny_dataset();
    CHECK_THROWS_AS(QuasiLikelihood(ds, volatility_regression_model(3)), DataError);
    CHECK_THROWS_AS(quasi_loglik(ds, volatility_regression_model(2), Vector::Zero(3)), ArgumentError);
}

TEST_CASE("rates") {
    const RateSpec r = RateSpec::standard(3);
    CHECK(r.alpha(10000)[2] == doctest::Approx(0.01));
    RateSpec bad = r;
    bad.exponent[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("LAQ decomposition of an exact quadratic has zero remainder") {
    Matrix prec(2, 2);
    prec << 3.0, 1.0, 1.0, 2.0;
    Vector vertex(2);
    vertex << 0.1, -0.2;
    const QuadraticObjective q(vertex, prec, 4.0);
    const Vector ts = Vector::Zero(2);
    const LaqDecomposition laq = laq_decompose(q, ts, RateSpec::standard(2), 100.0);
    CHECK((laq.gamma - prec / 100.0).norm() < 1e-12);
    Vector u(2);
    u << 1.5, -2.0;
    CHECK(std::abs(laq.remainder(u)) < 1e-12);
}

TEST_CASE("limit information with frozen covariates") {
    // d log S / d theta = 2, so Gamma = (1/2) * 4 = 2.
    const ModelSpec spec = testing::frozen_model(1);
    const PathBundle paths = simulate_paths(spec, 50, 2, 3);
    const LimitInformation li = limit_information(paths, spec, Vector::Zero(1));
    CHECK(li.gamma(0, 0) == doctest::Approx(2.0));
    CHECK_FALSE(li.degenerate);
    // Y(1) = -(2 + e^-2 - 1) / 2.
    CHECK(limit_contrast(paths, spec, Vector::Zero(1), Vector::Ones(1)) ==
          doctest::Approx(-0.5676676416183064).epsilon(1e-12));
}

TEST_CASE("chi0 attains the box boundary in the frozen model") {
    // -Y(d)/d^2 = (2d + e^{-2d} - 1)/(2 d^2) is smallest at d = 5.
    const ModelSpec spec = testing::frozen_model(1);
    const PathBundle paths = simulate_paths(spec, 20, 1, 1);
    const double chi0 = chi0_estimate(paths, spec, Vector::Zero(1), 10, 1);
    CHECK(chi0 == doctest::Approx((9.0 + std::exp(-10.0)) / 50.0).epsilon(1e-6));
}

TEST_CASE("chi0 is bounded by half the smallest eigenvalue of Gamma") {
    const ModelSpec spec = volatility_regression_model(2);
    Vector ts(2);
    ts << 0.0, 1.0;
    const PathBundle paths = simulate_paths(spec, 200, 5, 11);
    const LimitInformation li = limit_information(paths, spec, ts);
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(li.gamma).eigenvalues()[0];
    const double chi0 = chi0_estimate(paths, spec, ts, 20, 2);
    CHECK(chi0 > 0.0);
    CHECK(chi0 <= 0.5 * lmin + 1e-12);
}
