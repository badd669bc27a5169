#include "pqla/pqla.h"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "json_io.hpp"
#include "pqla/diagnostics.hpp"

struct pqla_config {
    pqla::RunConfig cfg;
};

struct pqla_dataset {
    pqla::Dataset ds;
};

struct pqla_result {
    pqla::EstimationResult result;
    std::string json;
};

struct pqla_study {
    pqla::StudyReport report;
    pqla::OutputOptions output;
    std::string csv;
    std::string json;
};

namespace {

thread_local std::string last_error;

int fail(int code, const std::string& what) {
    last_error = what;
    return code;
}

template <class F>
int guarded(F&& f) {
    try {
        last_error.clear();
        return f();
    } catch (const pqla::ConfigError& e) {
        return fail(PQLA_ERR_CONFIG, e.what());
    } catch (const pqla::DomainError& e) {
        return fail(PQLA_ERR_CONFIG, e.what());
    } catch (const pqla::SimulationError& e) {
        return fail(PQLA_ERR_DATA, e.what());
    } catch (const pqla::DataError& e) {
        return fail(PQLA_ERR_DATA, e.what());
    } catch (const pqla::EvaluationError& e) {
        return fail(PQLA_ERR_ESTIMATION, e.what());
    } catch (const pqla::OptimizationError& e) {
        return fail(PQLA_ERR_ESTIMATION, e.what());
    } catch (const std::bad_alloc&) {
        return fail(PQLA_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(PQLA_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(PQLA_ERR_INTERNAL, "unknown error");
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) throw pqla::ArgumentError(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* pqla_version(void) { return "1.0.0"; }

int pqla_schema_version(void) { return pqla::kSchemaVersion; }

const char* pqla_last_error(void) { return last_error.c_str(); }

int pqla_config_default(pqla_config** out) {
    return guarded([&]() -> int {
        require(out, "out");
        *out = new pqla_config{pqla::default_config()};
        return PQLA_OK;
    });
}

int pqla_config_load(const char* path, pqla_config** out) {
    return guarded([&]() -> int {
        require(path, "path");
        require(out, "out");
        *out = new pqla_config{pqla::load_config(path)};
        return PQLA_OK;
    });
}

int pqla_config_parse(const char* text, pqla_config** out) {
    return guarded([&]() -> int {
        require(text, "text");
        require(out, "out");
        *out = new pqla_config{pqla::parse_config(text)};
        return PQLA_OK;
    });
}

int pqla_config_set(pqla_config* cfg, const char* section, const char* key, const char* value) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(section, "section");
        require(key, "key");
        require(value, "value");
        pqla::set_config_value(cfg->cfg, section, key, value);
        return PQLA_OK;
    });
}

int pqla_config_dim(const pqla_config* cfg, int* p) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(p, "p");
        *p = cfg->cfg.experiment.model.p;
        return PQLA_OK;
    });
}

int pqla_config_master_seed(const pqla_config* cfg, uint64_t* seed) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(seed, "seed");
        *seed = cfg->cfg.experiment.master_seed;
        return PQLA_OK;
    });
}

void pqla_config_free(pqla_config* cfg) { delete cfg; }

int pqla_simulate(const pqla_config* cfg, uint64_t seed, int n, pqla_dataset** out) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(out, "out");
        const auto& x = cfg->cfg.experiment;
        const int size = n > 0 ? n : cfg->cfg.simulation_size();
        const pqla::PathBundle paths = pqla::simulate_paths(x.model, size, x.refinement, seed);
        *out = new pqla_dataset{pqla::simulate_observation(x.model, x.theta_star, paths)};
        return PQLA_OK;
    });
}

int pqla_dataset_load(const char* path, pqla_dataset** out) {
    return guarded([&]() -> int {
        require(path, "path");
        require(out, "out");
        *out = new pqla_dataset{pqla::load_dataset(path)};
        return PQLA_OK;
    });
}

int pqla_dataset_save(const pqla_dataset* ds, const char* path) {
    return guarded([&]() -> int {
        require(ds, "ds");
        require(path, "path");
        pqla::save_dataset(ds->ds, path);
        return PQLA_OK;
    });
}

int pqla_dataset_shape(const pqla_dataset* ds, int* n, int* d, int* m) {
    return guarded([&]() -> int {
        require(ds, "ds");
        if (n) *n = ds->ds.n;
        if (d) *d = ds->ds.d();
        if (m) *m = ds->ds.m();
        return PQLA_OK;
    });
}

void pqla_dataset_free(pqla_dataset* ds) { delete ds; }

int pqla_quasi_loglik(const pqla_config* cfg, const pqla_dataset* ds, const double* theta, size_t p, double* value,
                      double* score, double* hessian) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(ds, "ds");
        require(theta, "theta");
        require(value, "value");
        const auto& model = cfg->cfg.experiment.model;
        if (p != static_cast<size_t>(model.p)) throw pqla::ArgumentError("theta has the wrong dimension");
        const pqla::QuasiLikelihood h(ds->ds, model);
        const pqla::Vector t = Eigen::Map<const pqla::Vector>(theta, model.p);
        const pqla::Order order = hessian ? pqla::Order::Hessian
                                          : (score ? pqla::Order::Gradient : pqla::Order::Value);
        const pqla::Evaluation e = h.evaluate(t, order);
        *value = e.value;
        if (score) std::memcpy(score, e.gradient.data(), p * sizeof(double));
        if (hessian) {
            for (int i = 0; i < model.p; ++i) {
                for (int j = 0; j < model.p; ++j) hessian[i * model.p + j] = e.hessian(i, j);
            }
        }
        return PQLA_OK;
    });
}

int pqla_estimate(const pqla_config* cfg, const pqla_dataset* ds, const char* method, pqla_result** out) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(ds, "ds");
        require(method, "method");
        require(out, "out");
        *out = nullptr;
        const pqla::Method m = pqla::parse_method(method);
        const auto& x = cfg->cfg.experiment;
        const pqla::QuasiLikelihood h(ds->ds, x.model);
        const pqla::Vector zero = x.model.theta_box.project(pqla::Vector::Zero(x.model.p));
        pqla::EstimationResult r = pqla::qmle(h, x.model.theta_box, zero, x.newton);
        if (m == pqla::Method::Penalized) {
            const pqla::RateSpec rates = x.rates();
            r = pqla::penalized_qmle(h, x.model.theta_box, x.penalty, ds->ds.n, r.theta_hat, x.lqa, &rates);
        } else if (m == pqla::Method::Qbe) {
            pqla::McmcOptions mcmc = x.mcmc;
            mcmc.seed = x.master_seed;
            r = pqla::qbe(h, x.model.theta_box, r.theta_hat, mcmc);
        }
        auto* res = new pqla_result{std::move(r), {}};
        nlohmann::json doc = pqla::detail::result_json(res->result);
        doc["n"] = ds->ds.n;
        res->json = doc.dump(2) + "\n";
        *out = res;
        if (!res->result.converged) {
            return fail(PQLA_ERR_ESTIMATION, pqla::to_string(m) + " estimator did not converge");
        }
        return PQLA_OK;
    });
}

int pqla_result_theta(const pqla_result* res, double* theta, size_t capacity, size_t* p) {
    return guarded([&]() -> int {
        require(res, "res");
        const auto size = static_cast<size_t>(res->result.theta_hat.size());
        if (p) *p = size;
        if (theta) {
            if (capacity < size) throw pqla::ArgumentError("output buffer too small");
            std::memcpy(theta, res->result.theta_hat.data(), size * sizeof(double));
        }
        return PQLA_OK;
    });
}

int pqla_result_converged(const pqla_result* res, int* converged) {
    return guarded([&]() -> int {
        require(res, "res");
        require(converged, "converged");
        *converged = res->result.converged ? 1 : 0;
        return PQLA_OK;
    });
}

const char* pqla_result_json(const pqla_result* res) { return res ? res->json.c_str() : ""; }

int pqla_result_save(const pqla_result* res, const char* path) {
    return guarded([&]() -> int {
        require(res, "res");
        require(path, "path");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw pqla::ConfigError(std::string("cannot open '") + path + "' for writing");
        out << res->json;
        if (!out) throw pqla::DataError(std::string("failed writing '") + path + "'");
        return PQLA_OK;
    });
}

void pqla_result_free(pqla_result* res) { delete res; }

int pqla_study_run(const pqla_config* cfg, pqla_study** out) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(out, "out");
        *out = nullptr;
        auto* study = new pqla_study{pqla::run_study(cfg->cfg.experiment), cfg->cfg.output, {}, {}};
        study->csv = pqla::report_csv(study->report);
        study->json = pqla::report_json(study->report);
        *out = study;
        return PQLA_OK;
    });
}

const char* pqla_study_csv(const pqla_study* study) { return study ? study->csv.c_str() : ""; }

const char* pqla_study_json(const pqla_study* study) { return study ? study->json.c_str() : ""; }

double pqla_study_seconds(const pqla_study* study) { return study ? study->report.total_seconds : 0.0; }

int pqla_study_write(const pqla_study* study, const char* dir) {
    return guarded([&]() -> int {
        require(study, "study");
        pqla::write_study(study->report, study->output, dir ? std::filesystem::path(dir) : study->output.directory);
        return PQLA_OK;
    });
}

void pqla_study_free(pqla_study* study) { delete study; }

int pqla_diagnose(const pqla_config* cfg, const char* check, const char* dir) {
    return guarded([&]() -> int {
        require(cfg, "cfg");
        require(check, "check");
        pqla::run_diagnostic(cfg->cfg, check, dir ? std::filesystem::path(dir) : cfg->cfg.output.directory);
        return PQLA_OK;
    });
}

}  // extern "C"
