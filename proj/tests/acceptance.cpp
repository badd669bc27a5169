// End-to-end acceptance checks: one PASS/FAIL line per criterion, exit 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "pqla/asymptotics.hpp"
#include "pqla/experiments.hpp"

using namespace pqla;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double x, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string sci(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

int workers() {
    if (const char* env = std::getenv("PQLA_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig base_config() {
    ExperimentConfig cfg;
    cfg.workers = workers();
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();

    // Shared study: n = 1000, 2000, 10000 with 300 replications.
    ExperimentConfig cfg = base_config();
    cfg.n_grid = {1000, 2000, 10000};
    std::fprintf(stderr, "running the 300-replication study on %d worker(s)...\n", cfg.workers);
    const StudyReport study = run_study(cfg);

    report(1, "selection consistency", [&] {
        const double a = study.selection(Method::Penalized, 1000).exact;
        const double b = study.selection(Method::Penalized, 10000).exact;
        return Outcome{within(a, 0.591, 0.09) && within(b, 0.998, 0.01),
                       "true-model rate n=1000 " + fmt(a) + " (0.591 +- 0.09), n=10000 " + fmt(b) +
                           " (0.998 +- 0.01)"};
    });

    report(2, "QMLE accuracy at n=2000", [&] {
        const CellStats& t5 = study.cell(Method::Qmle, 2000, 4);
        const CellStats& t1 = study.cell(Method::Qmle, 2000, 0);
        const double sd5 = t5.sd.value_or(NAN);
        return Outcome{within(t5.mean, 2.0, 0.03) && within(sd5, 0.184, 0.03) && within(t1.mean, 0.0, 0.03),
                       "theta5 mean " + fmt(t5.mean) + " (2 +- 0.03), sd " + fmt(sd5) + " (0.184 +- 0.03); theta1 mean " +
                           fmt(t1.mean) + " (0 +- 0.03)"};
    });

    report(3, "penalized shrinkage trajectory", [&] {
        const double a = study.cell(Method::Penalized, 1000, 1).mean;
        const double b = study.cell(Method::Penalized, 10000, 1).mean;
        return Outcome{within(a, 0.792, 0.08) && within(b, 0.972, 0.03),
                       "p-QL theta2 mean n=1000 " + fmt(a) + " (0.792 +- 0.08), n=10000 " + fmt(b) +
                           " (0.972 +- 0.03)"};
    });

    report(4, "limit distribution (KS, 1000 reps at n=10000)", [&] {
        ExperimentConfig big = cfg;
        big.replications = 1000;
        std::vector<ReplicationRecord> recs;
        for (const auto& r : study.records) {
            if (r.n == 10000) recs.push_back(r);
        }
        std::fprintf(stderr, "running 700 more replications at n = 10000...\n");
        auto more = run_replications(big, 10000, 300, 700);
        recs.insert(recs.end(), more.begin(), more.end());
        const std::vector<int> j1 = cfg.truth().nonzero_set;
        std::vector<std::vector<double>> z(j1.size());
        int used = 0;
        for (const auto& r : recs) {
            const EstimatorOutcome* o = r.find(Method::Penalized);
            if (o == nullptr || !o->usable() || o->studentized.size() != static_cast<Eigen::Index>(j1.size())) continue;
            ++used;
            for (std::size_t k = 0; k < j1.size(); ++k) z[k].push_back(o->studentized[static_cast<Eigen::Index>(k)]);
        }
        bool ok = used >= 990;
        std::string detail = std::to_string(used) + " usable; p-values";
        for (std::size_t k = 0; k < j1.size(); ++k) {
            const KsResult ks = ks_normal_test(z[k]);
            ok = ok && ks.p_value > 0.01;
            detail += " theta" + std::to_string(j1[k] + 1) + "=" + fmt(ks.p_value);
        }
        return Outcome{ok, detail + " (all > 0.01)"};
    });

    report(5, "score and Hessian against finite differences", [&] {
        std::mt19937_64 rng(mix64(cfg.master_seed ^ 5));
        std::uniform_int_distribution<int> size(50, 500);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        double worst_g = 0.0, worst_h = 0.0;
        for (int probe = 0; probe < 100; ++probe) {
            const int n = size(rng);
            Vector theta(cfg.model.p);
            for (int j = 0; j < theta.size(); ++j) theta[j] = 2.0 * unit(rng);
            const Dataset ds = simulate_observation(cfg.model, cfg.theta_star,
                                                    simulate_paths(cfg.model, n, 4, derive_seed(cfg.master_seed, 5, probe)));
            const QuasiLikelihood h(ds, cfg.model);
            const Evaluation e = h.evaluate(theta, Order::Hessian);
            const double step = 1e-5;
            Vector g_fd(theta.size());
            Matrix h_fd(theta.size(), theta.size());
            for (int j = 0; j < theta.size(); ++j) {
                Vector up = theta, dn = theta;
                up[j] += step;
                dn[j] -= step;
                g_fd[j] = (h.value(up) - h.value(dn)) / (2.0 * step);
                h_fd.col(j) = (h.gradient(up) - h.gradient(dn)) / (2.0 * step);
            }
            worst_g = std::max(worst_g, (g_fd - e.gradient).cwiseAbs().maxCoeff() /
                                            std::max(1.0, e.gradient.cwiseAbs().maxCoeff()));
            worst_h = std::max(worst_h, (h_fd - e.hessian).cwiseAbs().maxCoeff() /
                                            std::max(1.0, e.hessian.cwiseAbs().maxCoeff()));
        }
        return Outcome{worst_g <= 1e-5 && worst_h <= 1e-5,
                       "100 probes, worst relative error score " + sci(worst_g) + ", hessian " + sci(worst_h) + " (<= 1e-5)"};
    });

    report(6, "LAQ remainder decay", [&] {
        const std::vector<LaqPair> pairs = laq_remainder_study(cfg, LaqStudy{});
        const auto smaller = std::count_if(pairs.begin(), pairs.end(), [](const LaqPair& p) { return p.fine < p.coarse; });
        const double frac = static_cast<double>(smaller) / static_cast<double>(pairs.size());
        return Outcome{frac >= 0.9, "sup |r_n| smaller at n=10000 in " + std::to_string(smaller) + "/" +
                                        std::to_string(pairs.size()) + " pairs (>= 90%)"};
    });

    report(7, "moment boundedness (m=4)", [&] {
        const RateSpec rates = cfg.rates();
        const auto e1 = study.estimates(Method::Penalized, 1000);
        const auto e2 = study.estimates(Method::Penalized, 10000);
        const MomentEstimate a = moment_estimate(std::span<const Vector>(e1), cfg.theta_star, rates, 1000, 4.0);
        const MomentEstimate b = moment_estimate(std::span<const Vector>(e2), cfg.theta_star, rates, 10000, 4.0);
        return Outcome{b.value <= 2.0 * a.value, "E|sqrt(n)(theta_hat - theta*)|^4 n=1000 " + fmt(a.value, 1) +
                                                     " (se " + fmt(a.mc_stderr, 1) + "), n=10000 " + fmt(b.value, 1) +
                                                     " (se " + fmt(b.mc_stderr, 1) + "); ratio " +
                                                     fmt(b.value / a.value) + " (<= 2)"};
    });

    report(8, "PLDI tail, p=2 reduced model", [&] {
        TailStudy s;
        s.model = volatility_regression_model(2);
        s.theta_star = Vector(2);
        s.theta_star << 0.0, 1.0;
        s.n = 1000;
        s.replications = 200;
        s.epsilon = 0.5;
        s.r_grid = {1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0};
        s.master_seed = cfg.master_seed;
        s.workers = cfg.workers;
        const TailCurve c = pldi_tail_estimate(s);
        const auto at = [&](double r) {
            return c.estimate[static_cast<std::size_t>(std::find(c.r.begin(), c.r.end(), r) - c.r.begin())];
        };
        const bool ordered = at(3.0) <= at(1.5);
        // decay: a fitted exponent L > 0 with every point within 3 MC standard errors of C r^{-L}
        bool fits = c.fitted_L.has_value() && *c.fitted_L > 0.0;
        double worst = 0.0;
        if (c.fitted_L) {
            for (std::size_t k = 0; k < c.r.size(); ++k) {
                const double model = std::exp(*c.fitted_log_C - *c.fitted_L * std::log(c.r[k]));
                const double p = c.estimate[k];
                const double se = std::sqrt(std::max(p * (1.0 - p), 1.0 / s.replications) / s.replications);
                worst = std::max(worst, std::abs(p - model) / se);
            }
            fits = fits && worst <= 3.0;
        }
        std::string curve;
        for (std::size_t k = 0; k < c.r.size(); ++k) curve += (k ? " " : "") + fmt(c.estimate[k], 2);
        return Outcome{ordered && fits, "P(r=3) " + fmt(at(3.0)) + " <= P(r=1.5) " + fmt(at(1.5)) + ": " +
                                            (ordered ? "yes" : "no") + "; fitted L " +
                                            (c.fitted_L ? fmt(*c.fitted_L, 4) : std::string("none")) +
                                            " (needs > 0), worst deviation " + fmt(worst, 2) + " se; curve " + curve};
    });

    report(9, "condition checker", [&] {
        std::vector<double> grid(cfg.n_grid.begin(), cfg.n_grid.end());
        const ConditionReport r = verify_conditions(cfg.penalty, cfg.rates(), grid, cfg.truth(), &cfg.theta_star);
        bool ok = r.beta.cwiseAbs().maxCoeff() == 0.0;
        std::string detail;
        for (const char* name : {"A2", "A3", "A4", "A5", "A6", "A11"}) {
            ok = ok && r.passes(name);
            detail += std::string(name) + (r.passes(name) ? "+ " : "- ");
        }
        const ConditionReport lasso = verify_conditions(PenaltySpec::lasso(), cfg.rates(), grid, cfg.truth(), &cfg.theta_star);
        ok = ok && !lasso.passes("A6");
        return Outcome{ok, "bridge: " + detail + "beta max " + fmt(r.beta.cwiseAbs().maxCoeff()) + "; lasso A6 " +
                               (lasso.passes("A6") ? "passes" : "fails")};
    });

    report(10, "determinism across worker counts", [&] {
        const fs::path dir = fs::temp_directory_path() / "pqla_acceptance_determinism";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "study.ini") << "[study]\nn_grid = 1000, 2000\nreplications = 100\n";
        bool ok = true;
        for (int w : {1, 4}) {
            const std::string cmd = std::string(PQLA_CLI_PATH) + " study " + (dir / "study.ini").string() +
                                    " --workers " + std::to_string(w) + " --out " + (dir / std::to_string(w)).string() +
                                    " 2>/dev/null";
            ok = ok && WEXITSTATUS(std::system(cmd.c_str())) == 0;
        }
        const bool csv = slurp(dir / "1" / "study.csv") == slurp(dir / "4" / "study.csv");
        const bool json = slurp(dir / "1" / "study.json") == slurp(dir / "4" / "study.json");
        const bool nonempty = !slurp(dir / "1" / "study.csv").empty();
        fs::remove_all(dir);
        return Outcome{ok && csv && json && nonempty, std::string("workers 1 vs 4: csv ") +
                                                           (csv ? "identical" : "differs") + ", json " +
                                                           (json ? "identical" : "differs")};
    });

    report(11, "oracle equivalence", [&] {
        const std::vector<bool> mask = cfg.truth().zero_mask();
        PenaltySpec none = cfg.penalty;
        none.weight_override = Vector::Zero(cfg.model.p);
        LqaOptions lqa = cfg.lqa;
        lqa.clamp_zero = mask;
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const Dataset ds = simulate_observation(
                cfg.model, cfg.theta_star, simulate_paths(cfg.model, 1000, cfg.refinement, derive_seed(cfg.master_seed, 11, i)));
            const QuasiLikelihood h(ds, cfg.model);
            const EstimationResult full = qmle(h, cfg.model.theta_box, Vector::Zero(cfg.model.p));
            const EstimationResult pen = penalized_qmle(h, cfg.model.theta_box, none, 1000, full.theta_hat, lqa);
            const RestrictedObjective reduced(h, mask, Vector::Zero(cfg.model.p));
            const Box rbox = Box::uniform(reduced.dim(), -5.0, 5.0);
            const EstimationResult red = qmle(reduced, rbox, Vector::Zero(reduced.dim()));
            if (!pen.converged || !red.converged) return Outcome{false, "solve did not converge in replication " + std::to_string(i)};
            worst = std::max(worst, (reduced.embed(red.theta_hat) - pen.theta_hat).cwiseAbs().maxCoeff());
        }
        return Outcome{worst <= 1e-6, "50 replications, max coordinate difference " + sci(worst) + " (<= 1e-6)"};
    });

    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d of 11 criteria failed (%.0f s)\n", failures, total);
    return failures == 0 ? 0 : 1;
}
