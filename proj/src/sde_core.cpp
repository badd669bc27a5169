#include "pqla/sde_core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace pqla {

// ---------------------------------------------------------------------------
// Volatility families

double VolatilityFamily::log_variance(std::span<const double> x, const Vector& theta) const {
    const double s = sigma(x, theta);
    return 2.0 * std::log(std::abs(s));
}

void VolatilityFamily::log_variance_derivatives(std::span<const double> x, const Vector& theta,
                                                Vector& grad, Matrix* hess) const {
    const Eigen::Index p = theta.size();
    grad.resize(p);
    Vector step(p);
    for (Eigen::Index j = 0; j < p; ++j) step[j] = 1e-4 * (1.0 + std::abs(theta[j]));

    Vector probe = theta;
    Vector plus(p), minus(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        probe[j] = theta[j] + step[j];
        plus[j] = log_variance(x, probe);
        probe[j] = theta[j] - step[j];
        minus[j] = log_variance(x, probe);
        probe[j] = theta[j];
        grad[j] = (plus[j] - minus[j]) / (2.0 * step[j]);
    }
    if (hess == nullptr) return;

    const double center = log_variance(x, theta);
    hess->resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        (*hess)(i, i) = (plus[i] - 2.0 * center + minus[i]) / (step[i] * step[i]);
        for (Eigen::Index j = i + 1; j < p; ++j) {
            auto eval = [&](double si, double sj) {
                probe[i] = theta[i] + si * step[i];
                probe[j] = theta[j] + sj * step[j];
                const double v = log_variance(x, probe);
                probe[i] = theta[i];
                probe[j] = theta[j];
                return v;
            };
            const double mixed =
                (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * step[i] * step[j]);
            (*hess)(i, j) = mixed;
            (*hess)(j, i) = mixed;
        }
    }
}

double SinExpVolatility::sigma(std::span<const double> x, const Vector& theta) const {
    return std::exp(0.5 * log_variance(x, theta));
}

double SinExpVolatility::log_variance(std::span<const double> x, const Vector& theta) const {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) acc += theta[k] * std::sin(x[static_cast<std::size_t>(k)]);
    return 2.0 * acc;
}

void SinExpVolatility::log_variance_derivatives(std::span<const double> x, const Vector& theta,
                                                Vector& grad, Matrix* hess) const {
    const Eigen::Index p = theta.size();
    grad.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) grad[k] = 2.0 * std::sin(x[static_cast<std::size_t>(k)]);
    if (hess != nullptr) hess->setZero(p, p);
}

bool SinExpVolatility::log_linear_features(std::span<const double> x, Vector& phi) const {
    for (Eigen::Index k = 0; k < phi.size(); ++k) phi[k] = 2.0 * std::sin(x[static_cast<std::size_t>(k)]);
    return true;
}

std::string ConstantVolatility::name() const { return "constant " + format_double(c_); }

double ConstantVolatility::log_variance(std::span<const double>, const Vector&) const {
    return 2.0 * std::log(std::abs(c_));
}

void ConstantVolatility::log_variance_derivatives(std::span<const double>, const Vector& theta,
                                                  Vector& grad, Matrix* hess) const {
    grad.setZero(theta.size());
    if (hess != nullptr) hess->setZero(theta.size(), theta.size());
}

double SinePeriodicDiffusion::coefficient(int k, double t, double x) const {
    return std::sin(2.0 * k * std::numbers::pi * t) / (1.0 + x * x);
}

std::string ConstantDiffusion::name() const { return "constant " + format_double(c_); }

// ---------------------------------------------------------------------------
// Model specification

Vector ModelSpec::initial_covariates() const {
    return x0.size() == 0 ? Vector::Zero(d) : x0;
}

void ModelSpec::validate() const {
    if (p < 1 || d < 1) throw ConfigError("model dimensions p and d must be >= 1");
    if (m != 1) throw ConfigError("only scalar observations (m = 1) are supported");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
    if (theta_box.dim() != p) throw ConfigError("parameter box dimension does not match p");
    if (!volatility) throw ConfigError("volatility family is not set");
    if (!covariate_diffusion) throw ConfigError("covariate diffusion is not set");
    if (x0.size() != 0 && x0.size() != d) throw ConfigError("x0 must have d entries");
    if (volatility->name() == "sin-exp" && p > d) {
        throw ConfigError("sin-exp volatility needs p <= d");
    }

    // Spot-check finiteness and positivity of S at x0 over the box corners
    // (for p <= 10) and the box centre.
    const Vector x = initial_covariates();
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    auto check = [&](const Vector& theta) {
        const double s = volatility->sigma(xs, theta);
        if (!std::isfinite(s)) throw ConfigError("volatility is not finite inside the parameter box");
    };
    Vector centre(p);
    for (int j = 0; j < p; ++j) centre[j] = 0.5 * (theta_box[j].lo + theta_box[j].hi);
    check(centre);
    if (p <= 10) {
        for (unsigned mask = 0; mask < (1u << p); ++mask) {
            Vector corner(p);
            for (int j = 0; j < p; ++j) corner[j] = (mask >> j) & 1u ? theta_box[j].hi : theta_box[j].lo;
            check(corner);
        }
    }
}

ModelSpec volatility_regression_model(int d, double horizon, double theta_bound) {
    ModelSpec spec;
    spec.p = d;
    spec.d = d;
    spec.m = 1;
    spec.horizon = horizon;
    spec.theta_box = Box::uniform(d, -theta_bound, theta_bound);
    spec.volatility = std::make_shared<SinExpVolatility>();
    spec.covariate_diffusion = std::make_shared<SinePeriodicDiffusion>();
    return spec;
}

// ---------------------------------------------------------------------------
// Simulation

PathBundle simulate_paths(const ModelSpec& spec, int n, int refinement, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("simulate_paths: n must be >= 1");
    if (refinement < 1) throw ArgumentError("simulate_paths: refinement must be >= 1");
    const Eigen::Index steps = static_cast<Eigen::Index>(n) * refinement;
    const double dt = spec.horizon / static_cast<double>(steps);

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    Matrix increments(steps, spec.d + 1);
    for (Eigen::Index i = 0; i < steps; ++i) {
        for (Eigen::Index c = 0; c <= spec.d; ++c) increments(i, c) = normal(gen);
    }
    PathBundle bundle = simulate_paths(spec, n, refinement, std::move(increments));
    bundle.seed = seed;
    return bundle;
}

PathBundle simulate_paths(const ModelSpec& spec, int n, int refinement, Matrix increments) {
    spec.validate();
    if (n < 1) throw ArgumentError("simulate_paths: n must be >= 1");
    if (refinement < 1) throw ArgumentError("simulate_paths: refinement must be >= 1");
    const Eigen::Index steps = static_cast<Eigen::Index>(n) * refinement;
    if (increments.rows() != steps || increments.cols() != spec.d + 1) {
        throw ArgumentError("simulate_paths: increments must be (n*refinement) x (d+1)");
    }

    PathBundle b;
    b.n = n;
    b.refinement = refinement;
    b.horizon = spec.horizon;
    b.fine_step = spec.horizon / static_cast<double>(steps);
    b.x_fine.resize(steps + 1, spec.d);
    b.x_fine.row(0) = spec.initial_covariates().transpose();

    const CovariateDiffusion& diffusion = *spec.covariate_diffusion;
    for (Eigen::Index i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * b.fine_step;
        for (Eigen::Index k = 0; k < spec.d; ++k) {
            const double x = b.x_fine(i, k);
            const double next = x + diffusion.coefficient(static_cast<int>(k) + 1, t, x) * increments(i, k + 1);
            if (!std::isfinite(next)) {
                throw SimulationError("non-finite covariate value", static_cast<std::size_t>(i + 1));
            }
            b.x_fine(i + 1, k) = next;
        }
    }
    b.wiener = std::move(increments);
    return b;
}

Dataset simulate_observation(const ModelSpec& spec, const Vector& theta_star, const PathBundle& paths) {
    spec.validate();
    if (theta_star.size() != spec.p) throw DomainError("theta_star has wrong dimension");
    if (!spec.theta_box.contains(theta_star)) throw DomainError("theta_star lies outside the closed parameter box");
    if (paths.x_fine.cols() != spec.d) throw ArgumentError("path bundle does not match the model's d");

    const Eigen::Index steps = paths.wiener.rows();
    const double dt = paths.fine_step;
    const VolatilityFamily& vol = *spec.volatility;

    Dataset ds;
    ds.n = paths.n;
    ds.times.resize(paths.n + 1);
    ds.x.resize(paths.n + 1, spec.d);
    ds.y.resize(paths.n + 1, 1);

    double y = spec.y0;
    ds.times[0] = 0.0;
    ds.x.row(0) = paths.x_fine.row(0);
    ds.y(0, 0) = y;
    for (Eigen::Index i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double drift = spec.drift ? spec.drift(t, y) : 0.0;
        y += drift * dt + vol.sigma(paths.covariates_at(i), theta_star) * paths.wiener(i, 0);
        if (!std::isfinite(y)) throw SimulationError("non-finite observation value", static_cast<std::size_t>(i + 1));
        if ((i + 1) % paths.refinement == 0) {
            const Eigen::Index j = (i + 1) / paths.refinement;
            ds.times[j] = static_cast<double>(j) * spec.horizon / static_cast<double>(paths.n);
            ds.x.row(j) = paths.x_fine.row(i + 1);
            ds.y(j, 0) = y;
        }
    }

    std::ostringstream prov;
    prov << "simulated model=" << vol.name() << " diffusion=" << spec.covariate_diffusion->name()
         << " refinement=" << paths.refinement;
    if (paths.seed) prov << " seed=" << *paths.seed;
    prov << " theta_star=";
    for (Eigen::Index k = 0; k < theta_star.size(); ++k) prov << (k ? ";" : "") << format_double(theta_star[k]);
    ds.provenance = prov.str();
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate(int min_n) const {
    if (n < 1) throw DataError("dataset needs at least one increment");
    if (n < min_n) {
        throw DataError("dataset has n = " + std::to_string(n) + " but at least " + std::to_string(min_n) +
                        " observations are required");
    }
    if (times.size() != n + 1 || x.rows() != n + 1 || y.rows() != n + 1) {
        throw DataError("dataset arrays must have n + 1 rows");
    }
    if (!times.allFinite() || !x.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite entries");
    for (int j = 1; j <= n; ++j) {
        if (!(times[j] > times[j - 1])) {
            throw DataError("observation times are not strictly increasing at row " + std::to_string(j));
        }
    }
    const double span = times[n] - times[0];
    const double h = span / n;
    for (int j = 0; j <= n; ++j) {
        if (std::abs(times[j] - times[0] - j * h) > 1e-12 * span) {
            throw DataError("observation grid is not uniform at row " + std::to_string(j));
        }
    }
}

Dataset Dataset::subsample(int factor) const {
    if (factor < 1 || n % factor != 0) throw ArgumentError("subsample factor must divide n");
    Dataset out;
    out.n = n / factor;
    out.times.resize(out.n + 1);
    out.x.resize(out.n + 1, x.cols());
    out.y.resize(out.n + 1, y.cols());
    for (int j = 0; j <= out.n; ++j) {
        out.times[j] = times[j * factor];
        out.x.row(j) = x.row(j * factor);
        out.y.row(j) = y.row(j * factor);
    }
    out.provenance = provenance + " subsample=" + std::to_string(factor);
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "# pqla-dataset schema_version=1 provenance=" << ds.provenance << '\n';
    out << 't';
    for (int k = 1; k <= ds.d(); ++k) out << ",x" << k;
    for (int k = 1; k <= ds.m(); ++k) out << ",y" << k;
    out << '\n';
    for (int j = 0; j <= ds.n; ++j) {
        out << format_double(ds.times[j]);
        for (int k = 0; k < ds.d(); ++k) out << ',' << format_double(ds.x(j, k));
        for (int k = 0; k < ds.m(); ++k) out << ',' << format_double(ds.y(j, k));
        out << '\n';
    }
    if (!out) throw DataError("write to " + path.string() + " failed");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view token, std::size_t line) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError("invalid number '" + std::string(token) + "'", line);
    }
    return value;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file " + path.string());

    std::string line;
    std::size_t lineno = 0;
    std::string recorded;
    int d = 0;
    int m = 0;
    bool have_header = false;
    std::vector<double> t;
    std::vector<double> xs;
    std::vector<double> ys;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            const auto pos = view.find("provenance=");
            if (pos != std::string_view::npos) recorded = std::string(view.substr(pos + 11));
            continue;
        }
        const auto fields = split_commas(view);
        if (!have_header) {
            if (fields.empty() || trim(fields[0]) != "t") throw ParseError("header must start with 't'", lineno);
            for (std::size_t c = 1; c < fields.size(); ++c) {
                const auto name = trim(fields[c]);
                const bool is_x = !name.empty() && name.front() == 'x';
                const bool is_y = !name.empty() && name.front() == 'y';
                const int index = is_x ? d + 1 : m + 1;
                if ((!is_x && !is_y) || (is_x && m > 0) || name.substr(1) != std::to_string(index)) {
                    throw ParseError("unexpected header column '" + std::string(name) + "'", lineno);
                }
                (is_x ? d : m) += 1;
            }
            if (d < 1 || m < 1) throw ParseError("header needs at least one x and one y column", lineno);
            have_header = true;
            continue;
        }
        const std::size_t expected = static_cast<std::size_t>(1 + d + m);
        if (fields.size() != expected) {
            throw ParseError("expected " + std::to_string(expected) + " columns (t, " + std::to_string(d) +
                                 " x, " + std::to_string(m) + " y) but found " + std::to_string(fields.size()),
                             lineno);
        }
        t.push_back(parse_number(fields[0], lineno));
        for (int k = 0; k < d; ++k) xs.push_back(parse_number(fields[static_cast<std::size_t>(1 + k)], lineno));
        for (int k = 0; k < m; ++k) ys.push_back(parse_number(fields[static_cast<std::size_t>(1 + d + k)], lineno));
    }
    if (!have_header) throw ParseError("missing header row", lineno);
    if (t.size() < 2) throw DataError("dataset needs at least two observation rows");

    Dataset ds;
    ds.n = static_cast<int>(t.size()) - 1;
    ds.times = Eigen::Map<const Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
    ds.x = Eigen::Map<const RowMatrix>(xs.data(), static_cast<Eigen::Index>(t.size()), d);
    ds.y = Eigen::Map<const RowMatrix>(ys.data(), static_cast<Eigen::Index>(t.size()), m);
    ds.provenance = "ingested " + path.string();
    if (!recorded.empty()) ds.provenance += " (" + recorded + ")";
    ds.validate();
    return ds;
}

}  // namespace pqla
