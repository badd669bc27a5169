#include "pqla/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pqla {

const std::map<std::string, std::vector<std::string>>& config_schema() {
    static const std::map<std::string, std::vector<std::string>> schema{
        {"model",
         {"p", "d", "horizon", "theta_bound", "volatility", "volatility_constant", "covariate_diffusion",
          "diffusion_constant", "drift"}},
        {"truth", {"theta_star"}},
        {"simulation", {"refinement", "n"}},
        {"study", {"n_grid", "replications", "master_seed", "estimators", "workers"}},
        {"penalty", {"kind", "q", "q_prime", "weights", "lambda", "c0", "cap", "weight_override"}},
        {"optimizer",
         {"max_iterations", "gradient_tolerance", "lqa_max_iterations", "deletion_threshold", "step_tolerance",
          "polish_iterations"}},
        {"mcmc", {"iterations", "burn_in", "adaptation", "scale", "target_acceptance"}},
        {"output", {"directory", "formats", "verbosity"}},
        {"diagnose",
         {"r_grid", "epsilon", "replications", "n", "penalized", "moment_order", "moment_replications",
          "laq_n_coarse", "laq_n_fine", "laq_replications", "laq_probes", "laq_radius", "holder_radius",
          "holder_samples", "chi0_budget"}},
    };
    return schema;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

class Builder {
public:
    Builder(const std::map<std::string, std::map<std::string, RunConfig::Entry>>& entries, std::string source)
        : entries_(entries), source_(std::move(source)) {}

    const RunConfig::Entry* find(const std::string& section, const std::string& key) const {
        const auto s = entries_.find(section);
        if (s == entries_.end()) return nullptr;
        const auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
        const RunConfig::Entry* e = find(section, key);
        std::string where = source_;
        if (e != nullptr && e->line > 0) where += ":" + std::to_string(e->line);
        throw ConfigError(where + ": [" + section + "] " + key + ": " + what);
    }

    double real(const std::string& section, const std::string& key, double fallback) const {
        const RunConfig::Entry* e = find(section, key);
        return e ? parse_real(section, key, e->value) : fallback;
    }

    long long integer(const std::string& section, const std::string& key, long long fallback) const {
        const RunConfig::Entry* e = find(section, key);
        if (!e) return fallback;
        long long v = 0;
        const std::string& s = e->value;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) fail(section, key, "expected an integer, got '" + s + "'");
        return v;
    }

    int count(const std::string& section, const std::string& key, int fallback) const {
        const long long v = integer(section, key, fallback);
        if (v < 0 || v > 1'000'000'000) fail(section, key, "value out of range");
        return static_cast<int>(v);
    }

    std::uint64_t unsigned64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
        const RunConfig::Entry* e = find(section, key);
        if (!e) return fallback;
        std::uint64_t v = 0;
        const std::string& s = e->value;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail(section, key, "expected a non-negative integer, got '" + s + "'");
        }
        return v;
    }

    bool boolean(const std::string& section, const std::string& key, bool fallback) const {
        const RunConfig::Entry* e = find(section, key);
        if (!e) return fallback;
        const std::string& s = e->value;
        if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
        if (s == "false" || s == "no" || s == "0" || s == "off") return false;
        fail(section, key, "expected true or false, got '" + s + "'");
    }

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
        const RunConfig::Entry* e = find(section, key);
        return e ? e->value : fallback;
    }

    std::vector<double> reals(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        const RunConfig::Entry* e = find(section, key);
        if (!e) return out;
        for (const auto& item : split_list(e->value)) out.push_back(parse_real(section, key, item));
        if (out.empty()) fail(section, key, "empty list");
        return out;
    }

private:
    double parse_real(const std::string& section, const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail(section, key, "expected a number, got '" + s + "'");
        }
        return v;
    }

    const std::map<std::string, std::map<std::string, RunConfig::Entry>>& entries_;
    std::string source_;
};

ModelSpec build_model(const Builder& b) {
    const auto* p_entry = b.find("model", "p");
    const auto* d_entry = b.find("model", "d");
    int p = b.count("model", "p", 10);
    int d = b.count("model", "d", p);
    if (!p_entry && d_entry) p = d;
    if (p < 1) b.fail("model", "p", "must be at least 1");
    if (d < 1) b.fail("model", "d", "must be at least 1");

    const double horizon = b.real("model", "horizon", 1.0);
    if (!(horizon > 0.0)) b.fail("model", "horizon", "must be positive");
    const double bound = b.real("model", "theta_bound", 5.0);
    if (!(bound > 0.0)) b.fail("model", "theta_bound", "must be positive");

    ModelSpec spec = volatility_regression_model(d, horizon, bound);
    spec.p = p;
    spec.theta_box = Box::uniform(p, -bound, bound);

    const std::string vol = b.text("model", "volatility", "sin-exp");
    if (vol == "constant") {
        const double c = b.real("model", "volatility_constant", 1.0);
        if (!(c > 0.0)) b.fail("model", "volatility_constant", "must be positive");
        spec.volatility = std::make_shared<ConstantVolatility>(c);
    } else if (vol != "sin-exp") {
        b.fail("model", "volatility", "unknown family '" + vol + "' (expected sin-exp or constant)");
    }
    const std::string diff = b.text("model", "covariate_diffusion", "sin2kpi");
    if (diff == "constant") {
        spec.covariate_diffusion = std::make_shared<ConstantDiffusion>(b.real("model", "diffusion_constant", 1.0));
    } else if (diff != "sin2kpi") {
        b.fail("model", "covariate_diffusion", "unknown diffusion '" + diff + "' (expected sin2kpi or constant)");
    }
    const std::string drift = b.text("model", "drift", "zero");
    if (drift != "zero") b.fail("model", "drift", "only the zero drift is supported");
    return spec;
}

RunConfig build(std::map<std::string, std::map<std::string, RunConfig::Entry>> entries, const std::string& source) {
    RunConfig out;
    out.entries = std::move(entries);
    const Builder b(out.entries, source);
    ExperimentConfig& x = out.experiment;

    x.model = build_model(b);
    const int p = x.model.p;

    const auto theta = b.reals("truth", "theta_star");
    if (!theta.empty()) {
        x.theta_star = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    } else if (p != 10) {
        throw ConfigError(source + ": [truth] theta_star is required when p != 10");
    }
    if (x.theta_star.size() != p) {
        b.fail("truth", "theta_star", "has " + std::to_string(x.theta_star.size()) + " entries, p = " + std::to_string(p));
    }

    x.refinement = b.count("simulation", "refinement", x.refinement);
    out.simulate_n = b.count("simulation", "n", 0);

    if (b.find("study", "n_grid")) {
        x.n_grid.clear();
        for (double v : b.reals("study", "n_grid")) {
            if (v != std::floor(v) || v < 1 || v > 1e9) b.fail("study", "n_grid", "entries must be positive integers");
            x.n_grid.push_back(static_cast<int>(v));
        }
    }
    x.replications = b.count("study", "replications", x.replications);
    x.master_seed = b.unsigned64("study", "master_seed", x.master_seed);
    x.workers = b.count("study", "workers", x.workers);
    if (b.find("study", "estimators")) {
        x.estimators.clear();
        for (const auto& name : split_list(b.text("study", "estimators", ""))) {
            Method m{};
            try {
                m = parse_method(name);
            } catch (const ConfigError& e) {
                b.fail("study", "estimators", e.what());
            }
            if (!x.uses(m)) x.estimators.push_back(m);
        }
    }

    const std::string kind = b.text("penalty", "kind", "bridge");
    if (kind == "lasso") {
        x.penalty = PenaltySpec::lasso();
    } else if (kind != "bridge") {
        b.fail("penalty", "kind", "unknown penalty '" + kind + "' (expected bridge or lasso)");
    }
    x.penalty.q = b.real("penalty", "q", x.penalty.q);
    x.penalty.q_prime = b.real("penalty", "q_prime", x.penalty.q_prime);
    x.penalty.lambda = b.real("penalty", "lambda", x.penalty.lambda);
    x.penalty.c0 = b.real("penalty", "c0", x.penalty.c0);
    x.penalty.cap = b.boolean("penalty", "cap", x.penalty.cap);
    if (b.find("penalty", "weights")) {
        try {
            x.penalty.weights_rule = parse_weight_rule(b.text("penalty", "weights", ""));
        } catch (const ConfigError& e) {
            b.fail("penalty", "weights", e.what());
        }
    }
    if (b.find("penalty", "weight_override")) {
        const auto w = b.reals("penalty", "weight_override");
        if (static_cast<int>(w.size()) != p) b.fail("penalty", "weight_override", "needs one weight per coordinate");
        x.penalty.weight_override = Eigen::Map<const Vector>(w.data(), p);
    }

    x.newton.max_iterations = b.count("optimizer", "max_iterations", x.newton.max_iterations);
    x.newton.gradient_tolerance = b.real("optimizer", "gradient_tolerance", x.newton.gradient_tolerance);
    x.lqa.gradient_tolerance = x.newton.gradient_tolerance;
    x.lqa.max_iterations = b.count("optimizer", "lqa_max_iterations", x.lqa.max_iterations);
    x.lqa.deletion_threshold = b.real("optimizer", "deletion_threshold", x.lqa.deletion_threshold);
    x.lqa.step_tolerance = b.real("optimizer", "step_tolerance", x.lqa.step_tolerance);
    x.lqa.polish_iterations = b.count("optimizer", "polish_iterations", x.lqa.polish_iterations);
    if (!(x.newton.gradient_tolerance > 0.0)) b.fail("optimizer", "gradient_tolerance", "must be positive");
    if (!(x.lqa.deletion_threshold >= 0.0)) b.fail("optimizer", "deletion_threshold", "must be non-negative");

    x.mcmc.iterations = b.count("mcmc", "iterations", x.mcmc.iterations);
    x.mcmc.burn_in = b.count("mcmc", "burn_in", x.mcmc.burn_in);
    x.mcmc.adaptation = b.count("mcmc", "adaptation", x.mcmc.adaptation);
    x.mcmc.scale = b.real("mcmc", "scale", x.mcmc.scale);
    x.mcmc.target_acceptance = b.real("mcmc", "target_acceptance", x.mcmc.target_acceptance);
    if (x.mcmc.burn_in >= x.mcmc.iterations) b.fail("mcmc", "burn_in", "must be smaller than iterations");
    if (x.mcmc.adaptation > x.mcmc.burn_in) b.fail("mcmc", "adaptation", "must not exceed burn_in");
    if (!(x.mcmc.scale >= 0.0)) b.fail("mcmc", "scale", "must be non-negative");

    out.output.directory = b.text("output", "directory", out.output.directory.string());
    if (b.find("output", "formats")) {
        out.output.csv = out.output.json = out.output.svg = false;
        for (const auto& f : split_list(b.text("output", "formats", ""))) {
            if (f == "csv") out.output.csv = true;
            else if (f == "json") out.output.json = true;
            else if (f == "svg") out.output.svg = true;
            else b.fail("output", "formats", "unknown format '" + f + "' (expected csv, json or svg)");
        }
    }
    out.output.verbosity = b.count("output", "verbosity", out.output.verbosity);

    DiagnoseOptions& g = out.diagnose;
    if (b.find("diagnose", "r_grid")) g.r_grid = b.reals("diagnose", "r_grid");
    g.epsilon = b.real("diagnose", "epsilon", g.epsilon);
    g.replications = b.count("diagnose", "replications", g.replications);
    g.n = b.count("diagnose", "n", g.n);
    g.penalized = b.boolean("diagnose", "penalized", g.penalized);
    g.moment_order = b.real("diagnose", "moment_order", g.moment_order);
    g.moment_replications = b.count("diagnose", "moment_replications", g.moment_replications);
    g.laq_n_coarse = b.count("diagnose", "laq_n_coarse", g.laq_n_coarse);
    g.laq_n_fine = b.count("diagnose", "laq_n_fine", g.laq_n_fine);
    g.laq_replications = b.count("diagnose", "laq_replications", g.laq_replications);
    g.laq_probes = b.count("diagnose", "laq_probes", g.laq_probes);
    g.laq_radius = b.real("diagnose", "laq_radius", g.laq_radius);
    g.holder_radius = b.real("diagnose", "holder_radius", g.holder_radius);
    g.holder_samples = b.count("diagnose", "holder_samples", g.holder_samples);
    g.chi0_budget = b.count("diagnose", "chi0_budget", g.chi0_budget);

    try {
        x.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return out;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
    const auto& schema = config_schema();
    std::map<std::string, std::map<std::string, RunConfig::Entry>> entries;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    auto fail = [&](const std::string& what) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!schema.contains(section)) fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
        if (section.empty()) fail("key outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto hash = value.find(" #");
        if (hash != std::string::npos) value = trim(value.substr(0, hash));
        const auto& keys = schema.at(section);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            fail("unknown key '" + key + "' in section [" + section + "]");
        }
        if (entries[section].contains(key)) fail("duplicate key '" + key + "' in section [" + section + "]");
        entries[section][key] = {value, line_no};
    }
    return build(std::move(entries), source);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

RunConfig default_config() { return build({}, "<defaults>"); }

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
    const auto& schema = config_schema();
    const auto s = schema.find(section);
    if (s == schema.end()) throw ConfigError("unknown section [" + section + "]");
    if (std::find(s->second.begin(), s->second.end(), key) == s->second.end()) {
        throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    }
    auto entries = cfg.entries;
    entries[section][key] = {trim(value), 0};
    cfg = build(std::move(entries), "<override>");
}

}  // namespace pqla
