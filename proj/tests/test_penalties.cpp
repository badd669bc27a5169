#include <cmath>
#include <vector>

#include "doctest.h"
#include "pqla/penalties.hpp"

using namespace pqla;

TEST_CASE("bridge weights and penalty value") {
    const PenaltySpec spec = PenaltySpec::bridge_default();
    CHECK(spec.q == 0.3);
    const RateSpec rates = RateSpec::standard(3);
    const Vector xi = spec.weights(1000, rates);
    CHECK(xi[1] == doctest::Approx(10.0));
    Vector th(3);
    th << 0.5, 0.0, -2.0;
    CHECK(penalty_value(spec, 1000, th) == doctest::Approx(20.433968097011515).epsilon(1e-12));
    CHECK(penalty_value(spec, 1e4, Vector::Constant(1, 0.5)) == doctest::Approx(std::cbrt(1e4) * std::pow(0.5, 0.3)).epsilon(1e-12));
    CHECK(spec.unit(0.0) == 0.0);
}

TEST_CASE("lasso weights follow the inverse rate") {
    const PenaltySpec spec = PenaltySpec::lasso();
    const Vector xi = spec.weights(400, RateSpec::standard(2));
    CHECK(xi[0] == doctest::Approx(20.0));
    CHECK(penalty_value(spec, 400, Vector::Constant(2, -0.5)) == doctest::Approx(20.0));
}

TEST_CASE("weight overrides and validation") {
    PenaltySpec spec = PenaltySpec::bridge_default();
    Vector w(2);
    w << 0.0, 3.0;
    spec.weight_override = w;
    CHECK(penalty_value(spec, 1e6, Vector::Ones(2)) == doctest::Approx(3.0));
    w[0] = -1.0;
    spec.weight_override = w;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    PenaltySpec q = PenaltySpec::bridge_default();
    q.q = 1.5;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    q = PenaltySpec::bridge_default();
    q.q_prime = 0.2;
    CHECK_THROWS_AS(q.validate(), ConfigError);
    CHECK_THROWS_AS(parse_weight_rule("nope"), ConfigError);
    CHECK(parse_penalty_kind("lasso") == PenaltyKind::Lasso);
}

TEST_CASE("support partition") {
    Vector th(4);
    th << 0.0, 1.0, 0.0, -2.0;
    const SupportPartition s = SupportPartition::from_theta(th);
    CHECK(s.zero_set == std::vector<int>{0, 2});
    CHECK(s.nonzero_set == std::vector<int>{1, 3});
    CHECK(s.is_zero(2));
    CHECK_FALSE(s.is_zero(3));
    CHECK(s.select(th, s.nonzero_set)[1] == -2.0);
}

TEST_CASE("G matrix on the zero set is n^{1/2} xi^{-1/q}") {
    const PenaltySpec spec = PenaltySpec::bridge_default();
    Vector th(2);
    th << 0.0, 1.0;
    const Matrix g = g_matrix(spec, RateSpec::standard(2), 1e4, SupportPartition::from_theta(th));
    // xi = n^{1/3}: n^{1/2} n^{-1/(3q)} = n^{1/2 - 10/9}.
    CHECK(g(0, 0) == doctest::Approx(std::pow(1e4, 0.5 - 10.0 / 9.0)));
    CHECK(g(1, 1) == doctest::Approx(1.0));
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("volatility regression configuration satisfies the conditions") {
    Vector th(10);
    th << 0, 1, 0, 1, 2, 0, 1, 1, 1, 0;
    const std::vector<double> grid{1000, 2000, 3000, 10000};
    const ConditionReport r = verify_conditions(PenaltySpec::bridge_default(), RateSpec::standard(10), grid,
                                                SupportPartition::from_theta(th), &th);
    for (const char* name : {"A2", "A3", "A4", "A5", "A6", "A11"}) {
        INFO(name);
        CHECK(r.passes(name));
    }
    CHECK(r.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.psi.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(r.get("A99"), ArgumentError);
}

TEST_CASE("lasso configuration fails A6") {
    Vector th(3);
    th << 0.0, 1.0, 2.0;
    const std::vector<double> grid{1000, 10000, 100000};
    const ConditionReport r = verify_conditions(PenaltySpec::lasso(), RateSpec::standard(3), grid,
                                                SupportPartition::from_theta(th), &th);
    CHECK_FALSE(r.passes("A6"));
    CHECK(r.beta[1] == doctest::Approx(1.0));
}

TEST_CASE("verify_conditions argument checks") {
    const std::vector<double> bad{1000, 100};
    CHECK_THROWS_AS(verify_conditions(PenaltySpec::bridge_default(), RateSpec::standard(2), bad,
                                      SupportPartition::full(2)),
                    ArgumentError);
}
