#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvqkd/coherent.hpp"
#include "cvqkd/gaussian.hpp"

namespace cvqkd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AttackMode { coherent, collective, dw };

AttackMode attack_mode_from_string(const std::string& s);
std::string to_string(AttackMode mode);

/// One complete experiment description: source, channel, budget, attack
/// model, optimizer grids and the sweep axis. Defaults are the headline
/// scenario (11/16 dB squeezing, 1% excess noise, beta = 0.95,
/// eps_s = eps_c = 1e-6).
struct ScenarioConfig {
  double squeezing_db = 11.0;
  double antisqueezing_db = 16.0;
  double loss = 0.0;
  double excess_noise = 0.01;
  double ec_efficiency = 0.95;
  SecurityBudget budget;
  AttackMode attack = AttackMode::coherent;
  double eps_robust = 1e-3;
  std::uint64_t seed = 1;
  long long rounds_total = 1'000'000'000;  // N, sifted rounds

  // sweep axis: either channel loss or total round count
  std::string sweep_axis = "loss";  // "loss" | "rounds"
  std::vector<double> sweep_values;

  // optimizer grids; alphas apply to the coherent attack only (the
  // collective and dw analyses use the unbounded scheme)
  std::vector<double> grid_k_fractions = {0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  std::vector<double> grid_deltas = {0.005, 0.01, 0.02, 0.05, 0.1};
  std::vector<double> grid_alphas = {20, 36, 52, 68, 80};

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const ScenarioConfig& cfg);
void from_json(const nlohmann::json& j, ScenarioConfig& cfg);
void to_json(nlohmann::json& j, const SecurityBudget& budget);
void from_json(const nlohmann::json& j, SecurityBudget& budget);

/// Parse and validate a config file. Unknown keys are rejected.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

/// Canonical serialized form (sorted keys, 2-space indent, trailing
/// newline); load(save(cfg)) == cfg byte for byte.
std::string normalized_json(const ScenarioConfig& cfg);

/// The honest-party two-mode state after the channel:
/// TMSV(squeezing, antisqueezing) through the loss/excess-noise map.
CovarianceMatrix model_covariance(const ScenarioConfig& cfg);

}  // namespace cvqkd
