#include "json_io.hpp"

namespace pqla::detail {

using nlohmann::json;

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json config_json(const ExperimentConfig& cfg) {
    const ModelSpec& m = cfg.model;
    json box = json::array();
    for (const Interval& iv : m.theta_box.bounds()) box.push_back({iv.lo, iv.hi});
    json estimators = json::array();
    for (Method e : cfg.estimators) estimators.push_back(to_string(e));

    json penalty{
        {"kind", to_string(cfg.penalty.kind)},
        {"q", cfg.penalty.q},
        {"q_prime", cfg.penalty.q_prime},
        {"weights", to_string(cfg.penalty.weights_rule)},
        {"lambda", cfg.penalty.lambda},
        {"c0", cfg.penalty.c0},
        {"cap", cfg.penalty.cap},
    };
    if (cfg.penalty.weight_override) penalty["weight_override"] = to_json(*cfg.penalty.weight_override);

    return {
        {"model",
         {{"p", m.p},
          {"d", m.d},
          {"horizon", m.horizon},
          {"theta_box", box},
          {"volatility", m.volatility ? m.volatility->name() : ""},
          {"covariate_diffusion", m.covariate_diffusion ? m.covariate_diffusion->name() : ""},
          {"drift", m.drift_name}}},
        {"theta_star", to_json(cfg.theta_star)},
        {"n_grid", cfg.n_grid},
        {"replications", cfg.replications},
        {"refinement", cfg.refinement},
        {"master_seed", cfg.master_seed},
        {"estimators", estimators},
        {"penalty", penalty},
        {"optimizer",
         {{"max_iterations", cfg.newton.max_iterations},
          {"gradient_tolerance", cfg.newton.gradient_tolerance},
          {"lqa_max_iterations", cfg.lqa.max_iterations},
          {"deletion_threshold", cfg.lqa.deletion_threshold},
          {"step_tolerance", cfg.lqa.step_tolerance},
          {"polish_iterations", cfg.lqa.polish_iterations}}},
        {"mcmc",
         {{"iterations", cfg.mcmc.iterations},
          {"burn_in", cfg.mcmc.burn_in},
          {"adaptation", cfg.mcmc.adaptation},
          {"scale", cfg.mcmc.scale},
          {"target_acceptance", cfg.mcmc.target_acceptance}}},
    };
}

json result_json(const EstimationResult& r) {
    json active = json::array();
    for (int j : r.active_set) active.push_back(j + 1);
    json out{
        {"schema_version", kSchemaVersion},
        {"method", to_string(r.method)},
        {"theta_hat", to_json(r.theta_hat)},
        {"theta_init", to_json(r.theta_init)},
        {"active_set", active},
        {"iterations", r.iterations},
        {"grad_norm", r.grad_norm},
        {"objective", r.objective},
        {"converged", r.converged},
    };
    if (r.mcmc) {
        out["mcmc"] = {
            {"acceptance_rate", r.mcmc->acceptance_rate},
            {"min_ess", r.mcmc->min_ess},
            {"ess", to_json(r.mcmc->ess)},
            {"posterior_sd", to_json(r.mcmc->posterior_sd)},
            {"mc_stderr", to_json(r.mcmc->mc_stderr)},
            {"diagnostics_passed", r.mcmc->passed},
        };
    }
    return out;
}

}  // namespace pqla::detail
