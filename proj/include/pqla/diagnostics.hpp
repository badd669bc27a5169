#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "pqla/config.hpp"

namespace pqla {

/// Writes study.csv / study.json / study.svg per `output` into `dir`.
std::vector<std::filesystem::path> write_study(const StudyReport& report, const OutputOptions& output,
                                               const std::filesystem::path& dir);

/// Runs one diagnostic (pldi, laq, moments, chi0, conditions) and writes its
/// files into `dir`. Throws ConfigError for an unknown check.
std::vector<std::filesystem::path> run_diagnostic(const RunConfig& cfg, std::string_view check,
                                                  const std::filesystem::path& dir);

}  // namespace pqla
