#include "pqla/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json_io.hpp"
#include "parallel.hpp"

namespace pqla {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

json header(const RunConfig& cfg, std::string_view check) {
    return {{"schema_version", kSchemaVersion},
            {"master_seed", cfg.experiment.master_seed},
            {"check", std::string(check)},
            {"config", detail::config_json(cfg.experiment)}};
}

std::vector<std::string> csv_comments(const RunConfig& cfg, std::string_view check) {
    return {"schema_version=" + std::to_string(kSchemaVersion) +
            " master_seed=" + std::to_string(cfg.experiment.master_seed) + " check=" + std::string(check)};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<fs::path> conditions(const RunConfig& cfg, const fs::path& dir) {
    const ExperimentConfig& x = cfg.experiment;
    std::vector<double> grid(x.n_grid.begin(), x.n_grid.end());
    const ConditionReport report = verify_conditions(x.penalty, x.rates(), grid, x.truth(), &x.theta_star);
    json doc = header(cfg, "conditions");
    json checks = json::array();
    bool all = true;
    for (const auto& c : report.checks) {
        all = all && c.pass;
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"n_grid", c.n_grid},
                          {"sequence", c.sequence},
                          {"exponent", optional_json(c.exponent)},
                          {"limit", optional_json(c.limit)},
                          {"detail", c.detail}});
    }
    doc["checks"] = checks;
    doc["all_pass"] = all;
    doc["beta"] = detail::to_json(report.beta);
    doc["psi"] = detail::to_json(report.psi);
    const fs::path out = dir / "conditions.json";
    write_text(out, doc.dump(2) + "\n");
    return {out};
}

std::vector<fs::path> chi0(const RunConfig& cfg, const fs::path& dir) {
    const ExperimentConfig& x = cfg.experiment;
    const int n = cfg.simulation_size();
    const std::uint64_t seed = derive_seed(x.master_seed, static_cast<std::uint64_t>(n), 0);
    const PathBundle paths = simulate_paths(x.model, n, x.refinement, seed);
    const LimitInformation info = limit_information(paths, x.model, x.theta_star);
    const double estimate = chi0_estimate(paths, x.model, x.theta_star, cfg.diagnose.chi0_budget, mix64(seed));
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(info.gamma);
    json doc = header(cfg, "chi0");
    doc["n"] = n;
    doc["seed"] = seed;
    doc["budget"] = cfg.diagnose.chi0_budget;
    doc["chi0_estimate"] = std::isfinite(estimate) ? json(estimate) : json(nullptr);
    doc["local_limit"] = 0.5 * eig.eigenvalues().minCoeff();
    doc["gamma_eigenvalues"] = detail::to_json(eig.eigenvalues());
    doc["gamma_degenerate"] = info.degenerate;
    doc["label"] = "upper-bound estimate of an infimum";
    const fs::path out = dir / "chi0.json";
    write_text(out, doc.dump(2) + "\n");
    return {out};
}

std::vector<fs::path> pldi(const RunConfig& cfg, const fs::path& dir) {
    const ExperimentConfig& x = cfg.experiment;
    const DiagnoseOptions& g = cfg.diagnose;
    if (x.model.p > 3) {
        throw ConfigError("the pldi diagnostic is limited to p <= 3 (configured p = " + std::to_string(x.model.p) + ")");
    }
    TailStudy study;
    study.model = x.model;
    study.theta_star = x.theta_star;
    study.n = g.n;
    study.refinement = x.refinement;
    study.replications = g.replications;
    study.epsilon = g.epsilon;
    study.r_grid = g.r_grid;
    study.penalized = g.penalized;
    study.penalty = x.penalty;
    study.master_seed = x.master_seed;
    study.workers = x.workers;
    const TailCurve curve = pldi_tail_estimate(study);

    const fs::path csv = dir / "pldi_tail.csv";
    auto comments = csv_comments(cfg, "pldi");
    comments.push_back(std::string(g.penalized ? "penalized" : "unpenalized") + " field, n=" + std::to_string(g.n));
    write_tail_csv(csv, curve, comments);

    json doc = header(cfg, "pldi");
    doc["label"] = curve.label;
    doc["penalized"] = g.penalized;
    doc["n"] = g.n;
    doc["epsilon"] = curve.epsilon;
    doc["replications"] = curve.replications;
    doc["r"] = curve.r;
    doc["raw"] = curve.raw;
    doc["estimate"] = curve.estimate;
    doc["mc_stderr"] = curve.mc_stderr;
    doc["fitted_L"] = optional_json(curve.fitted_L);
    doc["fitted_log_C"] = optional_json(curve.fitted_log_C);
    const fs::path js = dir / "pldi_tail.json";
    write_text(js, doc.dump(2) + "\n");
    return {csv, js};
}

std::vector<fs::path> laq(const RunConfig& cfg, const fs::path& dir) {
    const ExperimentConfig& x = cfg.experiment;
    const DiagnoseOptions& g = cfg.diagnose;
    LaqStudy study;
    study.n_coarse = g.laq_n_coarse;
    study.n_fine = g.laq_n_fine;
    study.replications = g.laq_replications;
    study.probes = g.laq_probes;
    study.radius = g.laq_radius;
    const std::vector<LaqPair> pairs = laq_remainder_study(x, study);

    int decreased = 0;
    for (const auto& pr : pairs) decreased += pr.fine < pr.coarse ? 1 : 0;
    const fs::path csv = dir / "laq_remainder.csv";
    {
        std::string text;
        for (const auto& c : csv_comments(cfg, "laq")) text += "# " + c + "\n";
        text += "# sup |r_n(u)| over " + std::to_string(g.laq_probes) + " probes with |u| <= " +
                format_double(g.laq_radius) + "; fraction decreasing=" +
                format_double(static_cast<double>(decreased) / static_cast<double>(pairs.size())) + "\n";
        text += "replication,seed,n" + std::to_string(g.laq_n_coarse) + ",n" + std::to_string(g.laq_n_fine) + "\n";
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            text += std::to_string(i) + "," + std::to_string(pairs[i].seed) + "," + format_double(pairs[i].coarse) +
                    "," + format_double(pairs[i].fine) + "\n";
        }
        write_text(csv, text);
    }

    // Hoelder quotient times |G_n^(00)|^q at both sample sizes, same paths.
    const SupportPartition truth = x.truth();
    const RateSpec rates = x.rates();
    const double q = x.penalty.q;
    std::vector<double> coarse(pairs.size()), fine(pairs.size());
    detail::parallel_for(pairs.size(), x.workers, [&](std::size_t i) {
        const PathBundle paths = simulate_paths(x.model, g.laq_n_fine, x.refinement, pairs[i].seed);
        const Dataset ds_fine = simulate_observation(x.model, x.theta_star, paths);
        const Dataset ds_coarse = ds_fine.subsample(g.laq_n_fine / g.laq_n_coarse);
        auto product = [&](const Dataset& ds) {
            const QuasiLikelihood h(ds, x.model);
            const double quotient = holder_quotient(h, x.model.theta_box, x.theta_star, rates, ds.n, q,
                                                    g.holder_radius, g.holder_samples, mix64(pairs[i].seed));
            double g00 = 0.0;
            const Matrix gm = g_matrix(x.penalty, rates, ds.n, truth);
            for (int j : truth.zero_set) g00 = std::max(g00, std::abs(gm(j, j)));
            return quotient * std::pow(g00, q);
        };
        coarse[i] = product(ds_coarse);
        fine[i] = product(ds_fine);
    });
    const fs::path holder = dir / "holder_quotient.csv";
    const std::vector<double> keys{static_cast<double>(g.laq_n_coarse), static_cast<double>(g.laq_n_fine)};
    const std::vector<double> medians{median(coarse), median(fine)};
    const std::vector<double> zero(2, 0.0);
    auto comments = csv_comments(cfg, "laq");
    comments.push_back("median over replications of (sampled lower bound of the Hoelder quotient) * |G_n^(00)|^q");
    write_estimate_csv(holder, "n", keys, medians, zero, comments);
    return {csv, holder};
}

std::vector<fs::path> moments(const RunConfig& cfg, const fs::path& dir) {
    ExperimentConfig x = cfg.experiment;
    const DiagnoseOptions& g = cfg.diagnose;
    x.replications = g.moment_replications;
    x.estimators = {Method::Qmle, Method::Penalized};
    const StudyReport report = run_study(x);
    std::vector<double> keys, pen, pen_se, ml, ml_se;
    for (int n : x.n_grid) {
        keys.push_back(n);
        const auto pe = report.estimates(Method::Penalized, n);
        const auto qe = report.estimates(Method::Qmle, n);
        const MomentEstimate mp = moment_estimate(std::span<const Vector>(pe), x.theta_star, x.rates(), n,
                                                  g.moment_order);
        const MomentEstimate mq = moment_estimate(std::span<const Vector>(qe), x.theta_star, x.rates(), n,
                                                  g.moment_order);
        pen.push_back(mp.value);
        pen_se.push_back(mp.mc_stderr);
        ml.push_back(mq.value);
        ml_se.push_back(mq.mc_stderr);
    }
    auto comments = csv_comments(cfg, "moments");
    comments.push_back("E|a_n^{-1}(theta_hat - theta*)|^m, m=" + format_double(g.moment_order) + ", replications=" +
                       std::to_string(x.replications));
    auto pc = comments;
    pc.push_back("estimator=penalized");
    auto qc = comments;
    qc.push_back("estimator=qmle");
    const fs::path a = dir / "moments_penalized.csv";
    const fs::path b = dir / "moments_qmle.csv";
    write_estimate_csv(a, "n", keys, pen, pen_se, pc);
    write_estimate_csv(b, "n", keys, ml, ml_se, qc);
    return {a, b};
}

}  // namespace

std::vector<fs::path> write_study(const StudyReport& report, const OutputOptions& output, const fs::path& dir) {
    ensure_dir(dir);
    std::vector<fs::path> out;
    if (output.csv) {
        out.push_back(dir / "study.csv");
        write_text(out.back(), report_csv(report));
    }
    if (output.json) {
        out.push_back(dir / "study.json");
        write_text(out.back(), report_json(report));
    }
    if (output.svg) {
        out.push_back(dir / "study.svg");
        write_text(out.back(), report_svg(report));
    }
    return out;
}

std::vector<fs::path> run_diagnostic(const RunConfig& cfg, std::string_view check, const fs::path& dir) {
    using Fn = std::vector<fs::path> (*)(const RunConfig&, const fs::path&);
    Fn fn = nullptr;
    if (check == "conditions") fn = conditions;
    else if (check == "chi0") fn = chi0;
    else if (check == "pldi") fn = pldi;
    else if (check == "laq") fn = laq;
    else if (check == "moments") fn = moments;
    else throw ConfigError("unknown check '" + std::string(check) + "' (expected pldi, laq, moments, chi0 or conditions)");
    if (check == "pldi" && cfg.experiment.model.p > 3) {
        throw ConfigError("the pldi diagnostic is limited to p <= 3 (configured p = " +
                          std::to_string(cfg.experiment.model.p) + ")");
    }
    ensure_dir(dir);
    return fn(cfg, dir);
}

}  // namespace pqla
