#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pqla/experiments.hpp"

namespace pqla {

struct OutputOptions {
    std::filesystem::path directory = ".";
    bool csv = true;
    bool json = true;
    bool svg = false;
    int verbosity = 1;
};

struct DiagnoseOptions {
    // pldi
    std::vector<double> r_grid{1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0};
    double epsilon = 0.5;
    int replications = 200;
    int n = 1000;
    bool penalized = true;
    // moments
    double moment_order = 4.0;
    int moment_replications = 300;
    // laq
    int laq_n_coarse = 1000;
    int laq_n_fine = 10000;
    int laq_replications = 100;
    int laq_probes = 100;
    double laq_radius = 2.0;
    double holder_radius = 2.0;
    int holder_samples = 200;
    // chi0
    int chi0_budget = 50;
};

/// Parsed configuration file. `entries` keeps the raw key/value text so
/// single keys can be overridden and the whole config rebuilt.
struct RunConfig {
    ExperimentConfig experiment;
    OutputOptions output;
    DiagnoseOptions diagnose;
    /// Sample size of `simulate`; 0 means the first entry of n_grid.
    int simulate_n = 0;

    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    std::map<std::string, std::map<std::string, Entry>> entries;

    int simulation_size() const { return simulate_n > 0 ? simulate_n : experiment.n_grid.front(); }
};

/// INI-style text: `[section]` headers, `key = value` lines, `#`/`;`
/// comments. Unknown sections and keys are rejected with ConfigError.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Defaults only (the volatility regression study).
RunConfig default_config();

/// Override one key and rebuild; same validation as the parser.
void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value);

/// Accepted sections and keys.
const std::map<std::string, std::vector<std::string>>& config_schema();

}  // namespace pqla
