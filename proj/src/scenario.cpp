#include "cvqkd/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace cvqkd {

AttackMode attack_mode_from_string(const std::string& s) {
  if (s == "coherent") return AttackMode::coherent;
  if (s == "collective") return AttackMode::collective;
  if (s == "dw") return AttackMode::dw;
  throw ConfigError("unknown attack mode '" + s +
                    "' (expected coherent, collective or dw)");
}

std::string to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::coherent: return "coherent";
    case AttackMode::collective: return "collective";
    case AttackMode::dw: return "dw";
  }
  throw ConfigError("invalid attack mode value");
}

void ScenarioConfig::validate() const {
  if (squeezing_db < 0.0) {
    throw ConfigError("squeezing_db must be >= 0");
  }
  if (antisqueezing_db < squeezing_db) {
    throw ConfigError("antisqueezing_db must be >= squeezing_db");
  }
  if (loss < 0.0 || loss > 1.0) {
    throw ConfigError("loss must lie in [0, 1]");
  }
  if (excess_noise < 0.0) {
    throw ConfigError("excess_noise must be >= 0");
  }
  if (ec_efficiency < 0.0 || ec_efficiency > 1.0) {
    throw ConfigError("ec_efficiency must lie in [0, 1]");
  }
  if (eps_robust <= 0.0 || eps_robust >= 1.0) {
    throw ConfigError("eps_robust must lie in (0, 1)");
  }
  if (rounds_total < 2) {
    throw ConfigError("rounds_total must be >= 2");
  }
  if (sweep_axis != "loss" && sweep_axis != "rounds") {
    throw ConfigError("sweep_axis must be 'loss' or 'rounds'");
  }
  for (double v : sweep_values) {
    if (sweep_axis == "loss" && (v < 0.0 || v > 1.0)) {
      throw ConfigError("sweep loss values must lie in [0, 1]");
    }
    if (sweep_axis == "rounds" && v < 2.0) {
      throw ConfigError("sweep round counts must be >= 2");
    }
  }
  if (grid_k_fractions.empty() || grid_deltas.empty()) {
    throw ConfigError("optimizer grids must be nonempty");
  }
  for (double f : grid_k_fractions) {
    if (f <= 0.0 || f >= 1.0) {
      throw ConfigError("k fractions must lie in (0, 1)");
    }
  }
  for (double d : grid_deltas) {
    if (d <= 0.0) {
      throw ConfigError("bin widths must be positive");
    }
  }
  if (attack == AttackMode::coherent && grid_alphas.empty()) {
    throw ConfigError("the coherent attack needs a nonempty alpha grid");
  }
  for (double a : grid_alphas) {
    if (a <= 0.0) {
      throw ConfigError("alpha values must be positive");
    }
  }
  try {
    budget.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("budget: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const SecurityBudget& budget) {
  j = nlohmann::json{{"eps_s", budget.eps_s},
                     {"eps_c", budget.eps_c},
                     {"eps_pe", budget.eps_pe},
                     {"smoothing_share", budget.smoothing_share},
                     {"sampling_share", budget.sampling_share},
                     {"pa_share", budget.pa_share}};
}

void from_json(const nlohmann::json& j, SecurityBudget& budget) {
  budget.eps_s = j.value("eps_s", budget.eps_s);
  budget.eps_c = j.value("eps_c", budget.eps_c);
  budget.eps_pe = j.value("eps_pe", budget.eps_pe);
  budget.smoothing_share = j.value("smoothing_share", budget.smoothing_share);
  budget.sampling_share = j.value("sampling_share", budget.sampling_share);
  budget.pa_share = j.value("pa_share", budget.pa_share);
}

void to_json(nlohmann::json& j, const ScenarioConfig& cfg) {
  j = nlohmann::json{{"squeezing_db", cfg.squeezing_db},
                     {"antisqueezing_db", cfg.antisqueezing_db},
                     {"loss", cfg.loss},
                     {"excess_noise", cfg.excess_noise},
                     {"ec_efficiency", cfg.ec_efficiency},
                     {"budget", cfg.budget},
                     {"attack", to_string(cfg.attack)},
                     {"eps_robust", cfg.eps_robust},
                     {"seed", cfg.seed},
                     {"rounds_total", cfg.rounds_total},
                     {"sweep_axis", cfg.sweep_axis},
                     {"sweep_values", cfg.sweep_values},
                     {"grid_k_fractions", cfg.grid_k_fractions},
                     {"grid_deltas", cfg.grid_deltas},
                     {"grid_alphas", cfg.grid_alphas}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& cfg) {
  static const std::set<std::string> known = {
      "squeezing_db",   "antisqueezing_db", "loss",
      "excess_noise",   "ec_efficiency",    "budget",
      "attack",         "eps_robust",       "seed",
      "rounds_total",   "sweep_axis",       "sweep_values",
      "grid_k_fractions", "grid_deltas",    "grid_alphas"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown config key '" + item.key() + "'");
    }
  }
  cfg.squeezing_db = j.value("squeezing_db", cfg.squeezing_db);
  cfg.antisqueezing_db = j.value("antisqueezing_db", cfg.antisqueezing_db);
  cfg.loss = j.value("loss", cfg.loss);
  cfg.excess_noise = j.value("excess_noise", cfg.excess_noise);
  cfg.ec_efficiency = j.value("ec_efficiency", cfg.ec_efficiency);
  if (j.contains("budget")) {
    j.at("budget").get_to(cfg.budget);
  }
  if (j.contains("attack")) {
    cfg.attack = attack_mode_from_string(j.at("attack").get<std::string>());
  }
  cfg.eps_robust = j.value("eps_robust", cfg.eps_robust);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.rounds_total = j.value("rounds_total", cfg.rounds_total);
  cfg.sweep_axis = j.value("sweep_axis", cfg.sweep_axis);
  cfg.sweep_values = j.value("sweep_values", cfg.sweep_values);
  cfg.grid_k_fractions = j.value("grid_k_fractions", cfg.grid_k_fractions);
  cfg.grid_deltas = j.value("grid_deltas", cfg.grid_deltas);
  cfg.grid_alphas = j.value("grid_alphas", cfg.grid_alphas);
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  try {
    j.get_to(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

std::string normalized_json(const ScenarioConfig& cfg) {
  // nlohmann::json objects keep keys sorted, so dump() is already canonical.
  nlohmann::json j = cfg;
  return j.dump(2) + "\n";
}

CovarianceMatrix model_covariance(const ScenarioConfig& cfg) {
  const CovarianceMatrix source =
      two_mode_squeezed_source(cfg.squeezing_db, cfg.antisqueezing_db);
  return apply_loss_excess(source, cfg.loss, cfg.excess_noise);
}

}  // namespace cvqkd
