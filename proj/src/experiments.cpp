#include "pqla/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "json_io.hpp"
#include "parallel.hpp"

namespace pqla {

std::string to_string(SelectionClass c) {
    switch (c) {
        case SelectionClass::Under: return "under";
        case SelectionClass::Over: return "over";
        case SelectionClass::Exact: return "exact";
        case SelectionClass::Mixed: return "mixed";
    }
    return "?";
}

SelectionClass classify_selection(const Vector& theta_hat, const SupportPartition& truth) {
    if (theta_hat.size() != truth.dim()) throw ArgumentError("classify_selection: dimension mismatch");
    bool contains = true;   // zero set of theta_hat contains J0
    bool contained = true;  // zero set of theta_hat is inside J0
    for (int j = 0; j < theta_hat.size(); ++j) {
        const bool zero = theta_hat[j] == 0.0;
        const bool true_zero = truth.is_zero(j);
        if (true_zero && !zero) contains = false;
        if (zero && !true_zero) contained = false;
    }
    if (contains && contained) return SelectionClass::Exact;
    if (contains) return SelectionClass::Under;
    if (contained) return SelectionClass::Over;
    return SelectionClass::Mixed;
}

// ---------------------------------------------------------------------------

Vector ExperimentConfig::default_theta_star() {
    Vector v(10);
    v << 0, 1, 0, 1, 2, 0, 1, 1, 1, 0;
    return v;
}

bool ExperimentConfig::uses(Method m) const {
    return std::find(estimators.begin(), estimators.end(), m) != estimators.end();
}

void ExperimentConfig::validate() const {
    model.validate();
    if (theta_star.size() != model.p) {
        throw ConfigError("theta_star has " + std::to_string(theta_star.size()) + " entries but p = " +
                          std::to_string(model.p));
    }
    if (!model.theta_box.contains(theta_star)) throw ConfigError("theta_star lies outside the parameter box");
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (refinement < 1) throw ConfigError("refinement must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (n_grid.empty()) throw ConfigError("n_grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] <= model.p) throw ConfigError("every n must exceed p");
        if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be increasing");
    }
    if (estimators.empty()) throw ConfigError("no estimators configured");
    penalty.validate();
}

const EstimatorOutcome* ReplicationRecord::find(Method m) const {
    for (const auto& o : outcomes) {
        if (o.method == m) return &o;
    }
    return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

Vector studentize(const QuasiLikelihood& h, const ExperimentConfig& cfg, int n, const Vector& theta_hat) {
    const SupportPartition truth = cfg.truth();
    if (truth.nonzero_set.empty()) return {};
    const Vector alpha = cfg.rates().alpha(n);
    const Matrix gamma = -(alpha.asDiagonal() * h.hessian(cfg.theta_star) * alpha.asDiagonal());
    const Matrix g11 = truth.block(0.5 * (gamma + gamma.transpose()), truth.nonzero_set, truth.nonzero_set);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(g11);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) return {};
    const Vector u = truth.select((theta_hat - cfg.theta_star).cwiseQuotient(alpha), truth.nonzero_set);
    return eig.operatorSqrt() * u;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& cfg, int n, int index) {
    if (index < 0 || index >= cfg.replications) {
        throw ArgumentError("replication index " + std::to_string(index) + " out of range");
    }
    const auto start = Clock::now();
    ReplicationRecord rec;
    rec.n = n;
    rec.index = index;
    rec.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(index));

    auto fail_all = [&](const std::string& what) {
        rec.error = what;
        rec.outcomes.clear();
        for (Method m : cfg.estimators) {
            EstimatorOutcome o;
            o.method = m;
            o.error = what;
            rec.outcomes.push_back(std::move(o));
        }
    };

    std::optional<Dataset> ds;
    try {
        const PathBundle paths = simulate_paths(cfg.model, n, cfg.refinement, rec.seed);
        ds = simulate_observation(cfg.model, cfg.theta_star, paths);
    } catch (const std::exception& e) {
        fail_all(e.what());
        rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        return rec;
    }
    const QuasiLikelihood h(*ds, cfg.model);
    const SupportPartition truth = cfg.truth();
    const Vector zero = cfg.model.theta_box.project(Vector::Zero(cfg.model.p));

    std::optional<EstimationResult> qmle_result;
    std::string qmle_error;
    try {
        qmle_result = qmle(h, cfg.model.theta_box, zero, cfg.newton);
    } catch (const std::exception& e) {
        qmle_error = e.what();
    }
    const Vector warm = qmle_result ? qmle_result->theta_hat : zero;

    for (Method m : cfg.estimators) {
        EstimatorOutcome o;
        o.method = m;
        try {
            switch (m) {
                case Method::Qmle:
                    if (qmle_result) o.result = qmle_result;
                    else o.error = qmle_error;
                    break;
                case Method::Penalized: {
                    const RateSpec rates = cfg.rates();
                    o.result = penalized_qmle(h, cfg.model.theta_box, cfg.penalty, n, warm, cfg.lqa, &rates);
                    break;
                }
                case Method::Qbe: {
                    McmcOptions mcmc = cfg.mcmc;
                    mcmc.seed = mix64(rec.seed ^ 0x9e3779b97f4a7c15ULL);
                    o.result = qbe(h, cfg.model.theta_box, warm, mcmc);
                    break;
                }
            }
            if (o.result) {
                o.selection = classify_selection(o.result->theta_hat, truth);
                if (m == Method::Penalized) o.studentized = studentize(h, cfg, n, o.result->theta_hat);
            }
        } catch (const std::exception& e) {
            o.result.reset();
            o.error = e.what();
        }
        if (o.result && !o.result->converged && o.error.empty()) o.error = "did not converge";
        rec.outcomes.push_back(std::move(o));
    }
    rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return rec;
}

std::vector<ReplicationRecord> run_replications(const ExperimentConfig& cfg, int n, int first, int count) {
    if (first < 0 || count < 0 || first + count > cfg.replications) {
        throw ArgumentError("replication range out of bounds");
    }
    std::vector<ReplicationRecord> out(static_cast<std::size_t>(count));
    detail::parallel_for(out.size(), cfg.workers, [&](std::size_t i) {
        out[i] = run_replication(cfg, n, first + static_cast<int>(i));
    });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t estimator_index(const ExperimentConfig& cfg, Method m) {
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        if (cfg.estimators[e] == m) return e;
    }
    throw ArgumentError("estimator " + to_string(m) + " is not part of this study");
}

std::size_t n_index(const ExperimentConfig& cfg, int n) {
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        if (cfg.n_grid[i] == n) return i;
    }
    throw ArgumentError("n = " + std::to_string(n) + " is not part of this study");
}

double binomial_se(double p, int count) {
    return count > 0 ? std::sqrt(p * (1.0 - p) / count) : 0.0;
}

}  // namespace

const CellStats& StudyReport::cell(Method m, int n, int j) const {
    return cells.at(estimator_index(config, m)).at(n_index(config, n)).at(static_cast<std::size_t>(j));
}

const SelectionRates& StudyReport::selection(Method m, int n) const {
    return rates.at(estimator_index(config, m)).at(n_index(config, n));
}

std::vector<Vector> StudyReport::estimates(Method m, int n) const {
    std::vector<Vector> out;
    for (const auto& rec : records) {
        if (rec.n != n) continue;
        const EstimatorOutcome* o = rec.find(m);
        if (o != nullptr && o->usable()) out.push_back(o->result->theta_hat);
    }
    return out;
}

StudyReport aggregate(const ExperimentConfig& cfg, std::vector<ReplicationRecord> records) {
    std::sort(records.begin(), records.end(), [](const ReplicationRecord& a, const ReplicationRecord& b) {
        return a.n != b.n ? a.n < b.n : a.index < b.index;
    });
    const int p = cfg.model.p;
    const SupportPartition truth = cfg.truth();
    StudyReport report;
    report.config = cfg;
    report.cells.assign(cfg.estimators.size(), {});
    report.rates.assign(cfg.estimators.size(), {});

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        const Method m = cfg.estimators[e];
        for (int n : cfg.n_grid) {
            std::vector<Vector> est;
            int attempted = 0;
            int under = 0, over = 0, exact = 0;
            for (const auto& rec : records) {
                if (rec.n != n) continue;
                ++attempted;
                const EstimatorOutcome* o = rec.find(m);
                if (o == nullptr || !o->usable()) continue;
                est.push_back(o->result->theta_hat);
                const SelectionClass c = o->selection;
                if (c == SelectionClass::Exact) ++exact;
                if (c == SelectionClass::Exact || c == SelectionClass::Under) ++under;
                if (c == SelectionClass::Exact || c == SelectionClass::Over) ++over;
            }
            const int count = static_cast<int>(est.size());
            if (attempted > 0 && count == 0) {
                throw OptimizationError("all replications failed for estimator " + to_string(m) + " at n = " +
                                        std::to_string(n));
            }
            std::vector<CellStats> cells(static_cast<std::size_t>(p));
            for (int j = 0; j < p; ++j) {
                CellStats& c = cells[static_cast<std::size_t>(j)];
                c.count = count;
                if (count == 0) continue;
                double sum = 0.0;
                int hits = 0;
                for (const Vector& v : est) {
                    sum += v[j];
                    const bool zero = v[j] == 0.0;
                    if (zero == truth.is_zero(j)) ++hits;
                }
                c.mean = sum / count;
                c.prob = static_cast<double>(hits) / count;
                if (count > 1) {
                    double ss = 0.0;
                    for (const Vector& v : est) ss += (v[j] - c.mean) * (v[j] - c.mean);
                    c.sd = std::sqrt(ss / (count - 1));
                }
            }
            report.cells[e].push_back(std::move(cells));

            SelectionRates r;
            r.count = count;
            r.failures = attempted - count;
            r.failure_rate = attempted > 0 ? static_cast<double>(r.failures) / attempted : 0.0;
            if (count > 0) {
                r.under = static_cast<double>(under) / count;
                r.over = static_cast<double>(over) / count;
                r.exact = static_cast<double>(exact) / count;
            }
            r.under_se = binomial_se(r.under, count);
            r.over_se = binomial_se(r.over, count);
            r.exact_se = binomial_se(r.exact, count);
            report.rates[e].push_back(r);
        }
    }
    report.records = std::move(records);
    return report;
}

StudyReport run_study(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = Clock::now();
    std::vector<ReplicationRecord> records;
    records.reserve(cfg.n_grid.size() * static_cast<std::size_t>(cfg.replications));
    for (int n : cfg.n_grid) {
        auto batch = run_replications(cfg, n, 0, cfg.replications);
        std::move(batch.begin(), batch.end(), std::back_inserter(records));
    }
    StudyReport report = aggregate(cfg, std::move(records));
    report.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string estimator_label(Method m) {
    switch (m) {
        case Method::Qmle: return "QMLE";
        case Method::Penalized: return "p-QL";
        case Method::Qbe: return "QBE";
    }
    return "?";
}

std::string fixed(double x) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << x;
    return out.str();
}

}  // namespace

std::string report_csv(const StudyReport& report) {
    const ExperimentConfig& cfg = report.config;
    std::ostringstream out;
    out << "# schema_version=" << kSchemaVersion << " master_seed=" << cfg.master_seed
        << " replications=" << cfg.replications << " refinement=" << cfg.refinement << '\n';
    out << "coordinate,true,estimator,statistic";
    for (int n : cfg.n_grid) out << ',' << n;
    out << '\n';

    auto row = [&](const std::string& head, auto&& value) {
        out << head;
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) out << ',' << value(i);
        out << '\n';
    };

    for (int j = 0; j < cfg.model.p; ++j) {
        const std::string coord = "theta" + std::to_string(j + 1) + "," + format_double(cfg.theta_star[j]);
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            const auto& by_n = report.cells[e];
            const std::string who = coord + "," + estimator_label(cfg.estimators[e]);
            row(who + ",mean", [&](std::size_t i) { return fixed(by_n[i][static_cast<std::size_t>(j)].mean); });
            row(who + ",sd", [&](std::size_t i) {
                const auto& sd = by_n[i][static_cast<std::size_t>(j)].sd;
                return sd ? fixed(*sd) : std::string();
            });
            row(who + ",prob", [&](std::size_t i) { return fixed(by_n[i][static_cast<std::size_t>(j)].prob); });
        }
    }
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        const auto& r = report.rates[e];
        const std::string who = "Total,," + estimator_label(cfg.estimators[e]);
        row(who + ",Under model", [&](std::size_t i) { return fixed(r[i].under); });
        row(who + ",Over model", [&](std::size_t i) { return fixed(r[i].over); });
        row(who + ",True model", [&](std::size_t i) { return fixed(r[i].exact); });
        row(who + ",Under model mc_stderr", [&](std::size_t i) { return fixed(r[i].under_se); });
        row(who + ",Over model mc_stderr", [&](std::size_t i) { return fixed(r[i].over_se); });
        row(who + ",True model mc_stderr", [&](std::size_t i) { return fixed(r[i].exact_se); });
        row(who + ",failure rate", [&](std::size_t i) { return fixed(r[i].failure_rate); });
    }
    return out.str();
}

std::string report_json(const StudyReport& report) {
    using nlohmann::json;
    const ExperimentConfig& cfg = report.config;
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["master_seed"] = cfg.master_seed;
    doc["config"] = detail::config_json(cfg);

    json cells = json::object();
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        json by_n = json::object();
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
            json coords = json::array();
            for (const CellStats& c : report.cells[e][i]) {
                json cell{{"mean", c.mean}, {"prob", c.prob}, {"count", c.count}};
                cell["sd"] = c.sd ? json(*c.sd) : json(nullptr);
                coords.push_back(std::move(cell));
            }
            const SelectionRates& r = report.rates[e][i];
            by_n[std::to_string(cfg.n_grid[i])] = {
                {"coordinates", coords},
                {"under_model", r.under},
                {"over_model", r.over},
                {"true_model", r.exact},
                {"under_model_mc_stderr", r.under_se},
                {"over_model_mc_stderr", r.over_se},
                {"true_model_mc_stderr", r.exact_se},
                {"converged", r.count},
                {"failures", r.failures},
                {"failure_rate", r.failure_rate},
            };
        }
        cells[to_string(cfg.estimators[e])] = std::move(by_n);
    }
    doc["results"] = std::move(cells);

    json reps = json::array();
    for (const auto& rec : report.records) {
        json r{{"n", rec.n}, {"index", rec.index}, {"seed", rec.seed}};
        if (!rec.error.empty()) r["error"] = rec.error;
        json est = json::object();
        for (const auto& o : rec.outcomes) {
            json entry = json::object();
            if (o.result) {
                entry["theta_hat"] = detail::to_json(o.result->theta_hat);
                entry["converged"] = o.result->converged;
                entry["iterations"] = o.result->iterations;
                entry["selection"] = to_string(o.selection);
            }
            if (!o.error.empty()) entry["error"] = o.error;
            est[to_string(o.method)] = std::move(entry);
        }
        r["estimators"] = std::move(est);
        reps.push_back(std::move(r));
    }
    doc["replications"] = std::move(reps);
    return doc.dump(2) + "\n";
}

std::string report_svg(const StudyReport& report) {
    const ExperimentConfig& cfg = report.config;
    std::size_t e = 0;
    for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
        if (cfg.estimators[k] == Method::Penalized) e = k;
    }
    const double width = 640, height = 400, left = 60, right = 150, top = 40, bottom = 50;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const std::size_t count = cfg.n_grid.size();
    const double lo = std::log(static_cast<double>(cfg.n_grid.front()));
    const double hi = std::log(static_cast<double>(cfg.n_grid.back()));
    auto xpos = [&](std::size_t i) {
        if (count == 1 || hi == lo) return left + plot_w / 2;
        return left + plot_w * (std::log(static_cast<double>(cfg.n_grid[i])) - lo) / (hi - lo);
    };
    auto ypos = [&](double v) { return top + plot_h * (1.0 - v); };
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<!-- schema_version=" << kSchemaVersion << " master_seed=" << cfg.master_seed << " -->\n";
    out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">Selection probability vs n ("
        << estimator_label(cfg.estimators[e]) << ")</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#000\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = t / 4.0;
        out << "<text x=\"" << left - 8 << "\" y=\"" << ypos(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
            << v << "</text>\n";
    }
    for (std::size_t i = 0; i < count; ++i) {
        out << "<text x=\"" << xpos(i) << "\" y=\"" << height - bottom + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << cfg.n_grid[i] << "</text>\n";
    }
    auto polyline = [&](const std::vector<double>& ys, const std::string& colour, const std::string& label,
                        int slot, const char* dash) {
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"";
        if (dash != nullptr) out << " stroke-dasharray=\"" << dash << "\"";
        out << " points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) out << (i ? " " : "") << xpos(i) << ',' << ypos(ys[i]);
        out << "\"/>\n";
        const double ly = top + 12.0 * slot + 6;
        out << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 30
            << "\" y2=\"" << ly << "\" stroke=\"" << colour << "\"/>";
        out << "<text x=\"" << width - right + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"10\">" << label
            << "</text>\n";
    };
    for (int j = 0; j < cfg.model.p; ++j) {
        std::vector<double> ys;
        for (std::size_t i = 0; i < count; ++i) ys.push_back(report.cells[e][i][static_cast<std::size_t>(j)].prob);
        polyline(ys, palette[j % 10], "theta" + std::to_string(j + 1), j, nullptr);
    }
    std::vector<double> exact;
    for (std::size_t i = 0; i < count; ++i) exact.push_back(report.rates[e][i].exact);
    polyline(exact, "#000000", "true model", cfg.model.p, "5,3");
    out << "</svg>\n";
    return out.str();
}

// ---------------------------------------------------------------------------

KsResult ks_normal_test(std::vector<double> sample) {
    if (sample.empty()) throw ArgumentError("ks_normal_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double count = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
        d = std::max({d, (static_cast<double>(i) + 1.0) / count - f, f - static_cast<double>(i) / count});
    }
    const double root = std::sqrt(count);
    const double lambda = (root + 0.12 + 0.11 / root) * d;
    double q = 0.0;
    if (lambda < 0.2) {
        q = 1.0;
    } else {
        double sign = 1.0;
        for (int k = 1; k <= 100; ++k) {
            const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
            q += term;
            if (std::abs(term) < 1e-12) break;
            sign = -sign;
        }
        q = std::clamp(2.0 * q, 0.0, 1.0);
    }
    return {d, q};
}

std::vector<Vector> probe_points(int p, int count, double radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vector> out;
    while (static_cast<int>(out.size()) < count) {
        Vector z(p);
        for (int j = 0; j < p; ++j) z[j] = normal(rng);
        const double norm = z.norm();
        const double rho = radius * std::pow(unif(rng), 1.0 / p);
        if (norm < 1e-12 || rho == 0.0) continue;
        out.push_back(z * (rho / norm));
    }
    return out;
}

std::vector<LaqPair> laq_remainder_study(const ExperimentConfig& cfg, const LaqStudy& study) {
    cfg.validate();
    if (study.n_coarse < 1 || study.n_fine % study.n_coarse != 0) {
        throw ConfigError("the fine sample size must be a multiple of the coarse one");
    }
    if (study.replications < 1 || study.probes < 1 || !(study.radius > 0.0)) {
        throw ConfigError("LAQ study needs positive replications, probes and radius");
    }
    const RateSpec rates = cfg.rates();
    const std::vector<Vector> probes = probe_points(cfg.model.p, study.probes, study.radius, mix64(cfg.master_seed));
    std::vector<LaqPair> out(static_cast<std::size_t>(study.replications));

    detail::parallel_for(out.size(), cfg.workers, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(study.n_fine), i);
        const PathBundle paths = simulate_paths(cfg.model, study.n_fine, cfg.refinement, seed);
        const Dataset fine = simulate_observation(cfg.model, cfg.theta_star, paths);
        const Dataset coarse = fine.subsample(study.n_fine / study.n_coarse);
        const Matrix gamma = limit_information(paths, cfg.model, cfg.theta_star).gamma;

        auto sup_remainder = [&](const Dataset& ds) {
            const QuasiLikelihood h(ds, cfg.model);
            const LaqDecomposition laq = laq_decompose(h, cfg.theta_star, rates, ds.n, &gamma);
            const Vector alpha = rates.alpha(ds.n);
            double best = 0.0;
            for (const Vector& u : probes) {
                if (!cfg.model.theta_box.contains(cfg.theta_star + alpha.cwiseProduct(u))) continue;
                best = std::max(best, std::abs(laq.remainder(u)));
            }
            return best;
        };
        out[i] = {seed, sup_remainder(coarse), sup_remainder(fine)};
    });
    return out;
}

}  // namespace pqla
