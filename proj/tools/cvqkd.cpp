// Command-line front door: single-point rates, figure sweeps, Monte Carlo
// protocol runs and a quick self-test of the numerical kernels.
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cvqkd/collective.hpp"
#include "cvqkd/optimize.hpp"
#include "cvqkd/scenario.hpp"
#include "cvqkd/sim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) {
    throw cvqkd::ConfigError("cannot write output file '" + out_path + "'");
  }
  out << content;
}

nlohmann::json outcome_to_json(const cvqkd::OptimizerOutcome& o) {
  const cvqkd::KeyRateBreakdown& b = o.result.breakdown;
  nlohmann::json j{{"schema_version", 1},
                   {"feasible", o.feasible},
                   {"ell", o.result.ell},
                   {"rate", o.result.rate},
                   {"k_fraction", o.k_fraction},
                   {"k", o.k},
                   {"n", o.n},
                   {"delta", o.delta},
                   {"alpha", std::isinf(o.alpha) ? nlohmann::json()
                                                 : nlohmann::json(o.alpha)},
                   {"d0", o.d0},
                   {"secrecy_eps", o.result.secrecy_eps},
                   {"status", o.result.status},
                   {"breakdown",
                    {{"uncertainty_bits", b.uncertainty_bits},
                     {"max_entropy_bits", b.max_entropy_bits},
                     {"cond_entropy_bits", b.cond_entropy_bits},
                     {"aep_bits", b.aep_bits},
                     {"leak_ec_bits", b.leak_ec_bits},
                     {"correctness_bits", b.correctness_bits},
                     {"pa_bits", b.pa_bits},
                     {"mu", b.mu},
                     {"raw_sum", b.raw_sum}}}};
  if (!o.feasible) {
    j["binding_constraint"] = o.binding_constraint;
  }
  return j;
}

nlohmann::json report_to_json(const cvqkd::RunReport& r) {
  nlohmann::json j{{"schema_version", r.schema_version},
                   {"seed", r.seed},
                   {"rounds_raw", r.rounds_raw},
                   {"sifted", r.sifted},
                   {"k", r.k},
                   {"n", r.n},
                   {"d0", r.d0},
                   {"d_pe", r.d_pe},
                   {"d_key", r.d_key},
                   {"d_tot", r.d_tot},
                   {"expected_distance", r.expected_distance},
                   {"pass", r.pass},
                   {"ell", r.ell},
                   {"key_digest", r.key_digest},
                   {"status", r.status}};
  if (r.key_hex) {
    j["key"] = *r.key_hex;
  }
  return j;
}

int run_selftest() {
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& name) {
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };
  using namespace cvqkd;

  check(std::abs(gaussian_entropy(CovarianceMatrix::vacuum(3))) < 1e-12,
        "vacuum entropy is zero");

  const CovarianceMatrix tmsv = two_mode_squeezed_source(11.0, 16.0);
  check(std::abs(tmsv(0, 0) - 9.9726) < 5e-4 &&
            std::abs(tmsv(0, 2) - 9.9328) < 5e-4,
        "11/16 dB source blocks");

  const CovarianceMatrix noisy = apply_loss_excess(tmsv, 0.04, 0.01);
  const CovarianceMatrix pure = gaussian_purification(noisy);
  check(gaussian_entropy(pure) < 1e-6, "purification is pure");

  const double c = overlap_c(0.01);
  check(std::abs(c / (0.01 * 0.01 / (2.0 * M_PI)) - 1.0) < 1e-4,
        "overlap constant small-delta limit");

  check(std::abs(gamma_fn(1.0) - (3.0 + 2.0 * std::sqrt(2.0))) < 1e-12,
        "gamma(1) closed form");

  check(counting_enumeration(2, 1.0) == 13, "lattice ball count n=2 d0=1");

  const std::vector<std::uint8_t> raw(128, 1);
  const auto key_a = toeplitz_privacy_amplification(raw, 32, 7);
  const auto key_b = toeplitz_privacy_amplification(raw, 32, 7);
  check(key_a == key_b && key_a.size() == 32, "hashing is deterministic");

  std::cout << (failures == 0 ? "selftest ok" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-key calculator and protocol simulator for "
               "binned-homodyne continuous-variable QKD"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> attack_flag;

  app.add_option("--config", config_path, "JSON scenario file");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--seed", seed_flag, "override the scenario seed");
  app.add_option("--attack", attack_flag, "attack model")
      ->check(CLI::IsMember({"coherent", "collective", "dw"}));

  app.fallthrough();
  CLI::App* rate_cmd =
      app.add_subcommand("rate", "optimized key rate at one point");
  rate_cmd->fallthrough();
  std::optional<double> loss_flag;
  std::optional<long long> rounds_flag;
  rate_cmd->add_option("--loss", loss_flag, "override channel loss");
  rate_cmd->add_option("--rounds", rounds_flag, "override total rounds N");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "optimized rates along the sweep axis, CSV");
  sweep_cmd->fallthrough();

  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo protocol run, JSON report");
  sim_cmd->fallthrough();
  long long sim_rounds = 100000;
  double sim_delta = 0.1;
  double sim_alpha = 20.0;
  double sim_k_fraction = 0.1;
  std::optional<double> sim_d0;
  bool emit_key = false;
  sim_cmd->add_option("--rounds", sim_rounds, "raw rounds before sifting");
  sim_cmd->add_option("--delta", sim_delta, "bin width");
  sim_cmd->add_option("--alpha", sim_alpha, "quadrature cutoff");
  sim_cmd->add_option("--k-fraction", sim_k_fraction,
                      "fraction of sifted rounds used for estimation");
  sim_cmd->add_option("--d0", sim_d0, "abort threshold override, bin units");
  sim_cmd->add_flag("--emit-key", emit_key, "include the key in the report");

  app.add_subcommand("selftest", "run quick kernel checks")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    cvqkd::ScenarioConfig cfg;
    if (!config_path.empty()) {
      cfg = cvqkd::load_scenario(config_path);
    }
    if (seed_flag) cfg.seed = *seed_flag;
    if (attack_flag) cfg.attack = cvqkd::attack_mode_from_string(*attack_flag);

    if (app.got_subcommand("selftest")) {
      return run_selftest();
    }
    if (app.got_subcommand(rate_cmd)) {
      if (loss_flag) cfg.loss = *loss_flag;
      if (rounds_flag) cfg.rounds_total = *rounds_flag;
      cfg.validate();
      cvqkd::StatsCache cache;
      const cvqkd::OptimizerOutcome outcome =
          cvqkd::optimize_parameters(cfg, cfg.rounds_total, cache);
      write_output(out_path, outcome_to_json(outcome).dump(2) + "\n");
      return 0;
    }
    if (app.got_subcommand(sweep_cmd)) {
      cfg.validate();
      const std::vector<cvqkd::SweepRow> rows = cvqkd::sweep(cfg);
      write_output(out_path, cvqkd::sweep_csv(cfg, rows));
      return 0;
    }
    if (app.got_subcommand(sim_cmd)) {
      cfg.validate();
      cvqkd::EndToEndConfig run_cfg{
          cvqkd::model_covariance(cfg),
          cvqkd::BinningScheme::bounded(sim_alpha, sim_delta),
          cfg.budget,
          cfg.ec_efficiency,
          0.0,
          sim_k_fraction,
          cfg.eps_robust,
          sim_d0,
          emit_key};
      const cvqkd::RunReport report =
          cvqkd::end_to_end_run(run_cfg, sim_rounds, cfg.seed);
      write_output(out_path, report_to_json(report).dump(2) + "\n");
      return 0;
    }
  } catch (const cvqkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
