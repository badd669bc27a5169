#pragma once

#include "json.hpp"
#include "pqla/experiments.hpp"

namespace pqla::detail {

nlohmann::json to_json(const Vector& v);
/// Config echo; worker count left out so reports do not depend on it.
nlohmann::json config_json(const ExperimentConfig& cfg);
/// Active-set indices are 1-based in the output.
nlohmann::json result_json(const EstimationResult& r);

}  // namespace pqla::detail
