#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "pqla_cli_test";

int run(const std::string& args) {
    const std::string cmd = std::string(PQLA_CLI_PATH) + " " + args + " 2>" + (kDir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string write_config(const std::string& name, const std::string& text) {
    const fs::path p = kDir / name;
    std::ofstream(p) << text;
    return p.string();
}

const char* kTen = R"(
[simulation]
n = 10000
[study]
master_seed = 5
)";

const char* kSmallStudy = R"(
[model]
p = 2
d = 2
[truth]
theta_star = 0, 1
[simulation]
refinement = 4
[study]
n_grid = 300, 900
replications = 8
master_seed = 123
[output]
formats = csv, json, svg
)";

struct Setup {
    Setup() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
    }
};

}  // namespace

TEST_CASE_FIXTURE(Setup, "simulate writes 1 + n data rows and is deterministic") {
    const std::string cfg = write_config("ten.ini", kTen);
    REQUIRE(run("simulate " + cfg + " --seed 42 --out " + (kDir / "a.csv").string()) == 0);
    REQUIRE(run("simulate " + cfg + " --seed 42 --out " + (kDir / "b.csv").string()) == 0);
    const std::string a = slurp(kDir / "a.csv");
    CHECK(a == slurp(kDir / "b.csv"));
    std::istringstream in(a);
    std::string line;
    int data = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        ++data;
    }
    CHECK(data == 10001);

    CHECK(run("estimate " + (kDir / "a.csv").string() + " " + cfg + " --method qmle --out " +
              (kDir / "q.json").string()) == 0);
    const auto q = nlohmann::json::parse(slurp(kDir / "q.json"));
    const double truth[10] = {0, 1, 0, 1, 2, 0, 1, 1, 1, 0};
    for (int j = 0; j < 10; ++j) CHECK(std::abs(q["theta_hat"][j].get<double>() - truth[j]) < 0.3);
    CHECK(q["schema_version"] == 1);

    CHECK(run("estimate " + (kDir / "a.csv").string() + " " + cfg + " --method pql --out " +
              (kDir / "p.json").string()) == 0);
    const auto p = nlohmann::json::parse(slurp(kDir / "p.json"));
    int zeros = 0;
    for (int j = 0; j < 10; ++j) zeros += p["theta_hat"][j].get<double>() == 0.0;
    CHECK(zeros > 0);
    CHECK(p["active_set"].size() == static_cast<std::size_t>(10 - zeros));

    CHECK(run("estimate " + (kDir / "a.csv").string() + " " + cfg + " --method simplex --out " +
              (kDir / "x.json").string()) == 2);
}

TEST_CASE_FIXTURE(Setup, "exit codes for configuration and data errors") {
    CHECK(run("simulate " + (kDir / "missing.ini").string() + " --out " + (kDir / "m.csv").string()) == 2);
    CHECK(slurp(kDir / "stderr.txt").find("missing.ini") != std::string::npos);
    CHECK(run("frobnicate") == 2);
    CHECK(run("") == 2);
    const std::string bad = write_config("bad.ini", "[study]\nreplicates = 3\n");
    CHECK(run("study " + bad) == 2);
    const std::string cfg = write_config("ten.ini", kTen);
    std::ofstream(kDir / "broken.csv") << "t,x1,y1\n0,0,0\n1,zz,1\n";
    CHECK(run("estimate " + (kDir / "broken.csv").string() + " " + cfg + " --out " + (kDir / "r.json").string()) ==
          3);
    CHECK(run("diagnose " + cfg + " --check pldi --out " + kDir.string()) == 2);
    CHECK(run("diagnose " + cfg + " --check tarot --out " + kDir.string()) == 2);
}

TEST_CASE_FIXTURE(Setup, "study output is identical across worker counts") {
    const std::string cfg = write_config("small.ini", kSmallStudy);
    REQUIRE(run("study " + cfg + " --workers 1 --out " + (kDir / "w1").string()) == 0);
    REQUIRE(run("study " + cfg + " --workers 3 --out " + (kDir / "w3").string()) == 0);
    CHECK(slurp(kDir / "w1" / "study.csv") == slurp(kDir / "w3" / "study.csv"));
    CHECK(slurp(kDir / "w1" / "study.json") == slurp(kDir / "w3" / "study.json"));
    CHECK(fs::exists(kDir / "w1" / "study.svg"));
    const auto j = nlohmann::json::parse(slurp(kDir / "w1" / "study.json"));
    CHECK(j["master_seed"] == 123);
    CHECK(j["schema_version"] == 1);
}

TEST_CASE_FIXTURE(Setup, "conditions diagnostic") {
    const std::string cfg = write_config("ten.ini", kTen);
    REQUIRE(run("diagnose " + cfg + " --check conditions --out " + kDir.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(kDir / "conditions.json"));
    CHECK(j["all_pass"] == true);
    CHECK(j["master_seed"] == 5);
    for (const auto& b : j["beta"]) CHECK(b.get<double>() == 0.0);
}

TEST_CASE_FIXTURE(Setup, "workers from the environment") {
    const std::string cfg = write_config("small.ini", kSmallStudy);
    const std::string cmd = "PQLA_WORKERS=2 " + std::string(PQLA_CLI_PATH) + " study " + cfg + " --out " +
                            (kDir / "env").string() + " 2>/dev/null";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    REQUIRE(run("study " + cfg + " --out " + (kDir / "plain").string()) == 0);
    CHECK(slurp(kDir / "env" / "study.csv") == slurp(kDir / "plain" / "study.csv"));
}
