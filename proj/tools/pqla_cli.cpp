// pqla command-line tool: simulate, estimate, study, diagnose.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pqla/pqla.h"

namespace {

struct ConfigDeleter {
    void operator()(pqla_config* c) const { pqla_config_free(c); }
};
struct DatasetDeleter {
    void operator()(pqla_dataset* d) const { pqla_dataset_free(d); }
};
struct ResultDeleter {
    void operator()(pqla_result* r) const { pqla_result_free(r); }
};
struct StudyDeleter {
    void operator()(pqla_study* s) const { pqla_study_free(s); }
};
using ConfigPtr = std::unique_ptr<pqla_config, ConfigDeleter>;

int report(int status) {
    if (status != PQLA_OK) std::fprintf(stderr, "pqla: error: %s\n", pqla_last_error());
    return status;
}

std::optional<int> workers_default() {
    const char* env = std::getenv("PQLA_WORKERS");
    if (env == nullptr || *env == '\0') return std::nullopt;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) return std::nullopt;
    return static_cast<int>(v);
}

int load(const std::string& path, std::optional<int> workers, ConfigPtr& out) {
    pqla_config* raw = nullptr;
    if (int s = pqla_config_load(path.c_str(), &raw); s != PQLA_OK) return report(s);
    out.reset(raw);
    if (workers) {
        const std::string w = std::to_string(*workers);
        if (int s = pqla_config_set(out.get(), "study", "workers", w.c_str()); s != PQLA_OK) return report(s);
    }
    return PQLA_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalized quasi-likelihood estimation for diffusion volatility models"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(pqla_version()));

    std::optional<int> workers = workers_default();
    int workers_flag = 0;
    int verbosity = 0;
    app.add_option("--workers", workers_flag, "worker threads (default: $PQLA_WORKERS or the config)")
        ->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", verbosity, "print progress to stderr");

    std::string config_path, dataset_path, out_path, method = "qmle", check;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto* sim = app.add_subcommand("simulate", "simulate a dataset from the configured model");
    sim->add_option("config", config_path, "config file")->required();
    sim->add_option("--seed", seed, "RNG seed (default: study master_seed)")->each([&](const std::string&) {
        seed_given = true;
    });
    sim->add_option("--out", out_path, "dataset CSV path")->required();

    auto* est = app.add_subcommand("estimate", "estimate theta from a dataset");
    est->add_option("dataset", dataset_path, "dataset CSV")->required();
    est->add_option("config", config_path, "config file")->required();
    est->add_option("--method", method, "qmle | pql | qbe");
    est->add_option("--out", out_path, "result JSON path")->required();

    auto* study = app.add_subcommand("study", "run the Monte Carlo study over the n grid");
    study->add_option("config", config_path, "config file")->required();
    study->add_option("--out", out_path, "output directory (default: [output] directory)");

    auto* diag = app.add_subcommand("diagnose", "asymptotic diagnostics");
    diag->add_option("config", config_path, "config file")->required();
    diag->add_option("--check", check, "pldi | laq | moments | chi0 | conditions")->required();
    diag->add_option("--out", out_path, "output directory (default: [output] directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : PQLA_ERR_CONFIG;
    }
    if (workers_flag > 0) workers = workers_flag;

    ConfigPtr cfg;
    if (int s = load(config_path, workers, cfg); s != PQLA_OK) return s;

    if (sim->parsed()) {
        if (!seed_given) pqla_config_master_seed(cfg.get(), &seed);
        std::unique_ptr<pqla_dataset, DatasetDeleter> ds;
        pqla_dataset* raw = nullptr;
        int s = pqla_simulate(cfg.get(), seed, 0, &raw);
        if (s != PQLA_OK) return report(s);
        ds.reset(raw);
        if (s = pqla_dataset_save(ds.get(), out_path.c_str()); s != PQLA_OK) return report(s);
        if (verbosity) std::fprintf(stderr, "wrote %s\n", out_path.c_str());
        return PQLA_OK;
    }

    if (est->parsed()) {
        pqla_dataset* raw = nullptr;
        if (int s = pqla_dataset_load(dataset_path.c_str(), &raw); s != PQLA_OK) return report(s);
        std::unique_ptr<pqla_dataset, DatasetDeleter> ds(raw);
        pqla_result* res_raw = nullptr;
        const int status = pqla_estimate(cfg.get(), ds.get(), method.c_str(), &res_raw);
        std::unique_ptr<pqla_result, ResultDeleter> res(res_raw);
        if (res == nullptr) return report(status);
        if (int s = pqla_result_save(res.get(), out_path.c_str()); s != PQLA_OK) return report(s);
        if (verbosity) std::fprintf(stderr, "wrote %s\n", out_path.c_str());
        return report(status);
    }

    if (study->parsed()) {
        pqla_study* raw = nullptr;
        if (int s = pqla_study_run(cfg.get(), &raw); s != PQLA_OK) return report(s);
        std::unique_ptr<pqla_study, StudyDeleter> st(raw);
        if (int s = pqla_study_write(st.get(), out_path.empty() ? nullptr : out_path.c_str()); s != PQLA_OK) {
            return report(s);
        }
        std::fprintf(stderr, "study finished in %.1f s\n", pqla_study_seconds(st.get()));
        return PQLA_OK;
    }

    if (diag->parsed()) {
        const int s = pqla_diagnose(cfg.get(), check.c_str(), out_path.empty() ? nullptr : out_path.c_str());
        return report(s);
    }
    return PQLA_ERR_INTERNAL;
}
