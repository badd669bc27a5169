#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pqla/asymptotics.hpp"

using namespace pqla;

namespace {

// H(theta) = sin(sqrt(n) theta_0): Lipschitz constant 1 in local coordinates.
class SineObjective final : public Objective {
public:
    explicit SineObjective(double n) : s_(std::sqrt(n)) {}
    int dim() const override { return 1; }
    Evaluation evaluate(const Vector& t, Order) const override {
        Evaluation e;
        e.value = std::sin(s_ * t[0]);
        e.gradient = Vector::Constant(1, s_ * std::cos(s_ * t[0]));
        e.hessian = Matrix::Constant(1, 1, -s_ * s_ * std::sin(s_ * t[0]));
        return e;
    }

private:
    double s_;
};

}  // namespace

TEST_CASE("local box scales the parameter box by the rates") {
    const Box u = local_box(Box::uniform(2, -5, 5), Vector::Constant(2, 1.0), RateSpec::standard(2), 100);
    CHECK(u[0].lo == doctest::Approx(-60.0));
    CHECK(u[0].hi == doctest::Approx(40.0));
}

TEST_CASE("field at the origin is one") {
    const Dataset ds = testing::tiny_dataset();
    const ModelSpec spec = volatility_regression_model(2);
    const QuasiLikelihood h(ds, spec);
    Vector ts(2);
    ts << 0.0, 1.0;
    const PenaltySpec pen = PenaltySpec::bridge_default();
    CHECK(field_value(h, spec.theta_box, ts, RateSpec::standard(2), 3, Vector::Zero(2)) == 1.0);
    CHECK(field_value(h, spec.theta_box, ts, RateSpec::standard(2), 3, Vector::Zero(2), &pen) == 1.0);
    CHECK_THROWS_AS(field_value(h, spec.theta_box, ts, RateSpec::standard(2), 3, Vector::Constant(2, 100.0)),
                    DomainError);
}

TEST_CASE("exact quadratic field is exp(-|u|^2 / 2)") {
    const double n = 400;
    const QuadraticObjective q(Vector::Zero(2), n * Matrix::Identity(2, 2));
    Vector u(2);
    u << 1.2, -0.7;
    CHECK(log_field_value(q, Box::uniform(2, -5, 5), Vector::Zero(2), RateSpec::standard(2), n, u) ==
          doctest::Approx(-0.5 * u.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("penalized field on the zero set picks up the penalty factor") {
    const double n = 1000;
    const Dataset ds = simulate_observation(volatility_regression_model(2), Vector::Ones(2),
                                            simulate_paths(volatility_regression_model(2), 200, 2, 4));
    const ModelSpec spec = volatility_regression_model(2);
    const QuasiLikelihood h(ds, spec);
    Vector ts(2);
    ts << 0.0, 1.0;
    const PenaltySpec pen = PenaltySpec::bridge_default();
    const RateSpec rates = RateSpec::standard(2);
    Vector u(2);
    u << 3.0, 0.0;
    const double plain = log_field_value(h, spec.theta_box, ts, rates, n, u);
    const double penal = log_field_value(h, spec.theta_box, ts, rates, n, u, &pen);
    const double xi = pen.weights(n, rates)[0];
    CHECK(penal == doctest::Approx(plain - xi * std::pow(3.0 / std::sqrt(n), 0.3)).epsilon(1e-12));
}

TEST_CASE("shell supremum of the quadratic field") {
    const double n = 100;
    const QuadraticObjective q(Vector::Zero(2), n * Matrix::Identity(2, 2));
    std::mt19937_64 rng(1);
    for (double r : {1.5, 3.0, 5.0, 8.0}) {
        const double s = shell_log_supremum(q, Box::uniform(2, -5, 5), Vector::Zero(2), RateSpec::standard(2), n, r,
                                            nullptr, rng);
        CHECK(s <= -0.5 * r * r + 1e-12);
        CHECK(s >= -0.5 * r * r - 1e-3);
        // r^2/2 > r^{1.5} only once r > 4
        CHECK((s < -std::pow(r, 1.5)) == (r > 4.0));
    }
    const double empty = shell_log_supremum(q, Box::uniform(2, -5, 5), Vector::Zero(2), RateSpec::standard(2), n,
                                            1e3, nullptr, rng);
    CHECK(empty == -std::numeric_limits<double>::infinity());
}

TEST_CASE("tail estimate: guards and the empty-shell convention") {
    TailStudy s;
    s.model = volatility_regression_model(10);
    s.theta_star = Vector::Zero(10);
    s.r_grid = {1.0};
    CHECK_THROWS_AS(pldi_tail_estimate(s), ConfigError);

    s.model = volatility_regression_model(1);
    s.theta_star = Vector::Constant(1, 1.0);
    s.n = 100;
    s.refinement = 2;
    s.replications = 50;
    s.r_grid = {0.5, 1e6};
    s.master_seed = 3;
    const TailCurve c = pldi_tail_estimate(s);
    CHECK(c.estimate.back() == 0.0);
    CHECK(c.estimate.front() == 1.0);
    CHECK(c.label == "lower-bound tail estimate");
    s.replications = 10;
    CHECK_THROWS_AS(pldi_tail_estimate(s), ConfigError);
}

TEST_CASE("isotonic smoothing") {
    const std::vector<double> v{1.0, 0.6, 0.8, 0.2, 0.3, 0.0};
    const std::vector<double> s = isotonic_nonincreasing(v);
    const std::vector<double> expected{1.0, 0.7, 0.7, 0.25, 0.25, 0.0};
    REQUIRE(s.size() == expected.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(expected[i]));
}

TEST_CASE("Hölder quotient") {
    ModelSpec spec = volatility_regression_model(2);
    spec.volatility = std::make_shared<ConstantVolatility>(1.0);
    const QuasiLikelihood flat(testing::tiny_dataset(), spec);
    CHECK(holder_quotient(flat, spec.theta_box, Vector::Zero(2), RateSpec::standard(2), 100, 0.3, 2.0, 50, 1) == 0.0);

    const SineObjective sine(100);
    const double lip = holder_quotient(sine, Box::uniform(1, -5, 5), Vector::Zero(1), RateSpec::standard(1), 100, 1.0,
                                       2.0, 500, 2);
    CHECK(lip <= 1.0);
    CHECK(lip > 0.9);
    CHECK_THROWS_AS(holder_quotient(sine, Box::uniform(1, -5, 5), Vector::Zero(1), RateSpec::standard(1), 100, 1.0,
                                    2.0, 0, 2),
                    ArgumentError);
}

TEST_CASE("moment estimates") {
    const RateSpec rates = RateSpec::standard(2);
    Vector e(2);
    e << 0.2 * 0.6, 1.0 + 0.2 * 0.8;  // |u| = 2 at n = 100 around (0, 1)
    Vector ts(2);
    ts << 0.0, 1.0;
    const std::vector<Vector> est{e, e};
    const MomentEstimate m = moment_estimate(std::span<const Vector>(est), ts, rates, 100, 2.0);
    CHECK(m.value == doctest::Approx(4.0));
    CHECK(m.mc_stderr == doctest::Approx(0.0));
    CHECK(m.count == 2);
    const MomentEstimate z = zero_block_moment(est, SupportPartition::from_theta(ts), Vector::Constant(1, 10.0), 1.0);
    CHECK(z.value == doctest::Approx(1.2));
    CHECK_THROWS_AS(moment_estimate(std::span<const Vector>(), ts, rates, 100, 2.0), ArgumentError);
}

TEST_CASE("limit law sampling") {
    Vector ts(3);
    ts << 0.0, 1.0, 2.0;
    LimitLaw law{Matrix::Identity(2, 2), Vector::Zero(2), SupportPartition::from_theta(ts)};
    const Matrix s = limit_law_sample(law, 20000, 8);
    REQUIRE(s.rows() == 20000);
    REQUIRE(s.cols() == 3);
    CHECK(s.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.col(1).mean() == doctest::Approx(0.0).epsilon(0.03));
    CHECK((s.col(2).array() - s.col(2).mean()).square().mean() == doctest::Approx(1.0).epsilon(0.05));
    law.gamma11(0, 1) = 2.0;
    law.gamma11(1, 0) = 2.0;
    CHECK_THROWS_AS(limit_law_sample(law, 10, 1), ArgumentError);
}

TEST_CASE("estimate CSV layout") {
    const auto path = std::filesystem::temp_directory_path() / "pqla_estimate_test.csv";
    const std::vector<double> k{1, 2}, e{0.5, 0.25}, s{0.1, 0.05};
    write_estimate_csv(path, "r", k, e, s, {"hello"});
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() == "# hello\nr,estimate,mc_stderr\n1,0.5,0.10000000000000001\n2,0.25,0.050000000000000003\n");
    std::filesystem::remove(path);
}
