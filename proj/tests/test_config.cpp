#include <string>

#include "doctest.h"
#include "pqla/config.hpp"

using namespace pqla;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "cfg.ini");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults describe the volatility regression study") {
    const RunConfig c = default_config();
    CHECK(c.experiment.model.p == 10);
    CHECK(c.experiment.n_grid == std::vector<int>{1000, 2000, 3000, 10000});
    CHECK(c.experiment.replications == 300);
    CHECK(c.experiment.penalty.q == 0.3);
    CHECK(c.output.csv);
    CHECK_FALSE(c.output.svg);
    CHECK(c.simulation_size() == 1000);
}

TEST_CASE("parsing sections, lists and comments") {
    const RunConfig c = parse_config(R"(
# comment
[model]
p = 2
d = 3          # trailing comment
[truth]
theta_star = 0, 1.5
; another comment
[study]
n_grid = 100, 400
estimators = qmle, qbe
workers = 2
[penalty]
kind = lasso
q = 1
[output]
formats = json, svg
)");
    CHECK(c.experiment.model.p == 2);
    CHECK(c.experiment.model.d == 3);
    CHECK(c.experiment.theta_star[1] == 1.5);
    CHECK(c.experiment.n_grid == std::vector<int>{100, 400});
    CHECK(c.experiment.uses(Method::Qbe));
    CHECK_FALSE(c.experiment.uses(Method::Penalized));
    CHECK(c.experiment.workers == 2);
    CHECK(c.experiment.penalty.kind == PenaltyKind::Lasso);
    CHECK_FALSE(c.output.csv);
    CHECK(c.output.svg);
    CHECK(c.entries.at("model").at("d").line == 5);
}

TEST_CASE("strict rejection with source locations") {
    CHECK(error_of("[model]\np = 10\nbogus = 1\n") == "cfg.ini:3: unknown key 'bogus' in section [model]");
    CHECK(error_of("[nowhere]\n") == "cfg.ini:1: unknown section [nowhere]");
    CHECK(error_of("[model]\np = 10\np = 10\n").find("duplicate key 'p'") != std::string::npos);
    CHECK(error_of("p = 10\n").find("outside of any section") != std::string::npos);
    CHECK(error_of("[study]\nreplications = many\n") ==
          "cfg.ini:2: [study] replications: expected an integer, got 'many'");
    CHECK(error_of("[model]\np = 3\nd = 3\n").find("theta_star is required") != std::string::npos);
    CHECK(error_of("[study]\nestimators = qmle, magic\n").find("magic") != std::string::npos);
    CHECK(error_of("[output]\nformats = pdf\n").find("unknown format") != std::string::npos);
}

TEST_CASE("overrides rebuild the config") {
    RunConfig c = default_config();
    set_config_value(c, "study", "workers", "4");
    CHECK(c.experiment.workers == 4);
    set_config_value(c, "study", "master_seed", "99");
    CHECK(c.experiment.workers == 4);
    CHECK(c.experiment.master_seed == 99);
    CHECK_THROWS_AS(set_config_value(c, "study", "nope", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "study", "workers", "0"), ConfigError);
}

TEST_CASE("missing file") {
    try {
        load_config("/nonexistent/x.ini");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/x.ini") != std::string::npos);
    }
}

TEST_CASE("schema lists every section") {
    const auto& s = config_schema();
    for (const char* sec : {"model", "truth", "simulation", "study", "penalty", "optimizer", "mcmc", "output",
                            "diagnose"}) {
        CHECK(s.contains(sec));
    }
}
