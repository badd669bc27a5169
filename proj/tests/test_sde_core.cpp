#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pqla/sde_core.hpp"

using namespace pqla;

TEST_CASE("seed derivation is a pure function of its arguments") {
    CHECK(derive_seed(7, 1000, 3) == derive_seed(7, 1000, 3));
    CHECK(derive_seed(7, 1000, 3) != derive_seed(7, 1000, 4));
    CHECK(derive_seed(7, 1000, 3) != derive_seed(7, 2000, 3));
    CHECK(derive_seed(7, 1000, 3) != derive_seed(8, 1000, 3));
    CHECK(mix64(0) != 0);
}

TEST_CASE("box projection and bound detection") {
    const Box box = Box::uniform(2, -1.0, 1.0);
    Vector t(2);
    t << 3.0, -0.5;
    CHECK_FALSE(box.contains(t));
    const Vector p = box.project(t);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -0.5);
    CHECK(box.at_bound(p, 0, 1.0));
    CHECK_FALSE(box.at_bound(p, 0, -1.0));
    CHECK_FALSE(box.at_bound(p, 1, 1.0));
}

TEST_CASE("volatility regression model defaults") {
    const ModelSpec spec = volatility_regression_model(10);
    CHECK(spec.p == 10);
    CHECK(spec.d == 10);
    CHECK(spec.horizon == 1.0);
    CHECK(spec.theta_box[3].lo == -5.0);
    CHECK(spec.theta_box[3].hi == 5.0);
    CHECK_NOTHROW(spec.validate());
    SinePeriodicDiffusion a;
    CHECK(a.coefficient(1, 0.25, 0.0) == doctest::Approx(1.0));
    CHECK(a.coefficient(2, 0.125, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("sin-exp volatility closed forms") {
    SinExpVolatility v;
    const double x[2] = {0.4, -1.1};
    Vector th(2);
    th << 0.7, 0.2;
    const double expected = std::exp(0.7 * std::sin(0.4) + 0.2 * std::sin(-1.1));
    CHECK(v.sigma(x, th) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(v.log_variance(x, th) == doctest::Approx(2.0 * std::log(expected)).epsilon(1e-14));
    Vector g;
    Matrix h;
    v.log_variance_derivatives(x, th, g, &h);
    CHECK(g[0] == doctest::Approx(2.0 * std::sin(0.4)));
    CHECK(g[1] == doctest::Approx(2.0 * std::sin(-1.1)));
    CHECK(h.norm() == 0.0);
}

TEST_CASE("finite-difference default derivatives of a user family") {
    FunctionVolatility f("cubic", [](std::span<const double> x, const Vector& t) {
        return std::exp(t[0] * x[0] + 0.5 * t[0] * t[0]);
    });
    const double x[1] = {0.3};
    Vector th(1);
    th << 0.4;
    Vector g;
    Matrix h;
    f.log_variance_derivatives(x, th, g, &h);
    CHECK(g[0] == doctest::Approx(2.0 * (0.3 + 0.4)).epsilon(1e-6));
    CHECK(h(0, 0) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("Euler scheme with prescribed increments") {
    ModelSpec spec = volatility_regression_model(1);
    spec.covariate_diffusion = std::make_shared<ConstantDiffusion>(0.5);
    spec.volatility = std::make_shared<ConstantVolatility>(2.0);
    Matrix dw(4, 2);
    dw << 0.1, 0.2, -0.3, 0.1, 0.05, -0.4, 0.2, 0.0;
    const PathBundle paths = simulate_paths(spec, 2, 2, dw);
    REQUIRE(paths.fine_points() == 5);
    CHECK(paths.x_fine(4, 0) == doctest::Approx(0.5 * (0.2 + 0.1 - 0.4 + 0.0)));
    Vector th(1);
    th << 0.0;
    const Dataset ds = simulate_observation(spec, th, paths);
    CHECK(ds.n == 2);
    CHECK(ds.y(1, 0) == doctest::Approx(2.0 * (0.1 - 0.3)));
    CHECK(ds.y(2, 0) == doctest::Approx(2.0 * (0.1 - 0.3 + 0.05 + 0.2)));
    CHECK(ds.x(1, 0) == doctest::Approx(paths.x_fine(2, 0)));
    CHECK_THROWS_AS(simulate_paths(spec, 2, 3, dw), ArgumentError);
}

TEST_CASE("simulation is deterministic given the seed") {
    const ModelSpec spec = volatility_regression_model(3);
    Vector th(3);
    th << 0.0, 1.0, -0.5;
    const Dataset a = simulate_observation(spec, th, simulate_paths(spec, 200, 5, 42));
    const Dataset b = simulate_observation(spec, th, simulate_paths(spec, 200, 5, 42));
    const Dataset c = simulate_observation(spec, th, simulate_paths(spec, 200, 5, 43));
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
    CHECK(a.y != c.y);
    CHECK(a.times[200] == doctest::Approx(1.0));
    CHECK_NOTHROW(a.validate(200));
    CHECK_THROWS_AS(a.validate(201), DataError);
}

TEST_CASE("theta* outside the box is a domain error") {
    const ModelSpec spec = volatility_regression_model(1);
    Vector th(1);
    th << 6.0;
    CHECK_THROWS_AS(simulate_observation(spec, th, simulate_paths(spec, 10, 1, 1)), DomainError);
}

TEST_CASE("subsample keeps every k-th observation") {
    const ModelSpec spec = volatility_regression_model(2);
    const Dataset ds = simulate_observation(spec, Vector::Ones(2), simulate_paths(spec, 100, 2, 9));
    const Dataset s = ds.subsample(10);
    CHECK(s.n == 10);
    CHECK(s.y(3, 0) == ds.y(30, 0));
    CHECK(s.x(10, 1) == ds.x(100, 1));
    CHECK_THROWS_AS(ds.subsample(7), ArgumentError);
}

TEST_CASE("dataset CSV round trip and malformed input") {
    const auto dir = std::filesystem::temp_directory_path() / "pqla_sde_test";
    std::filesystem::create_directories(dir);
    const Dataset ds = testing::tiny_dataset();
    save_dataset(ds, dir / "d.csv");
    const Dataset back = load_dataset(dir / "d.csv");
    CHECK(back.n == 3);
    CHECK(back.x == ds.x);
    CHECK(back.y == ds.y);
    CHECK(back.times == ds.times);

    {
        std::ofstream out(dir / "bad.csv");
        out << "t,x1,y1\n0,0,0\n0.5,abc,1\n";
    }
    try {
        load_dataset(dir / "bad.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    {
        std::ofstream out(dir / "uneven.csv");
        out << "t,x1,y1\n0,0,0\n0.5,0,1\n1.5,0,1\n";
    }
    CHECK_THROWS_AS(load_dataset(dir / "uneven.csv"), DataError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.csv"), DataError);
    std::filesystem::remove_all(dir);
}
