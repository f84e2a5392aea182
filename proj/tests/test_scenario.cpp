#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "cvqkd/optimize.hpp"
#include "cvqkd/scenario.hpp"

using namespace cvqkd;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/cvqkd-test-" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("attack mode names") {
  CHECK(attack_mode_from_string("coherent") == AttackMode::coherent);
  CHECK(attack_mode_from_string("collective") == AttackMode::collective);
  CHECK(attack_mode_from_string("dw") == AttackMode::dw);
  CHECK(to_string(AttackMode::coherent) == "coherent");
  CHECK(to_string(AttackMode::collective) == "collective");
  CHECK(to_string(AttackMode::dw) == "dw");
  CHECK_THROWS_AS(attack_mode_from_string("pns"), ConfigError);
}

TEST_CASE("config validation") {
  ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("field ranges") {
    auto expect_reject = [](ScenarioConfig c) {
      CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    ScenarioConfig c = cfg;
    c.squeezing_db = -1.0;
    expect_reject(c);
    c = cfg;
    c.antisqueezing_db = cfg.squeezing_db - 1.0;
    expect_reject(c);
    c = cfg;
    c.loss = 1.5;
    expect_reject(c);
    c = cfg;
    c.excess_noise = -0.1;
    expect_reject(c);
    c = cfg;
    c.ec_efficiency = 1.2;
    expect_reject(c);
    c = cfg;
    c.eps_robust = 0.0;
    expect_reject(c);
    c = cfg;
    c.rounds_total = 1;
    expect_reject(c);
    c = cfg;
    c.sweep_axis = "noise";
    expect_reject(c);
    c = cfg;
    c.grid_deltas = {0.1, -0.1};
    expect_reject(c);
    c = cfg;
    c.grid_k_fractions = {};
    expect_reject(c);
    c = cfg;
    c.grid_alphas = {};
    expect_reject(c);  // coherent attack needs alphas
    c.attack = AttackMode::collective;
    CHECK_NOTHROW(c.validate());  // unbounded analyses do not
    c = cfg;
    c.budget.eps_s = 0.0;
    expect_reject(c);
  }
}

TEST_CASE("json round trip") {
  ScenarioConfig cfg;
  cfg.loss = 0.07;
  cfg.attack = AttackMode::collective;
  cfg.seed = 99;
  cfg.sweep_values = {0.0, 0.05, 0.1};
  cfg.grid_deltas = {0.02, 0.01};

  SUBCASE("normalized form is a fixed point") {
    const std::string text = normalized_json(cfg);
    CHECK(text.back() == '\n');
    const ScenarioConfig back = scenario_from_json(nlohmann::json::parse(text));
    CHECK(normalized_json(back) == text);
    CHECK(back.loss == cfg.loss);
    CHECK(back.attack == AttackMode::collective);
    CHECK(back.seed == 99);
    CHECK(back.grid_deltas == cfg.grid_deltas);
  }
  SUBCASE("partial objects fill defaults") {
    const ScenarioConfig sparse =
        scenario_from_json(nlohmann::json::parse(R"({"loss": 0.25})"));
    CHECK(sparse.loss == 0.25);
    CHECK(sparse.squeezing_db == 11.0);
    CHECK(sparse.budget.eps_s == 1e-6);
    CHECK(sparse.attack == AttackMode::coherent);
  }
  SUBCASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(
        scenario_from_json(nlohmann::json::parse(R"({"channel_loss": 0.1})")),
        ConfigError);
    CHECK_THROWS_AS(
        scenario_from_json(nlohmann::json::parse(R"({"loss": "dark"})")),
        ConfigError);
    CHECK_THROWS_AS(
        scenario_from_json(nlohmann::json::parse(R"({"attack": "pns"})")),
        ConfigError);
  }
  SUBCASE("file loading") {
    const std::string path = write_temp("cfg.json", normalized_json(cfg));
    const ScenarioConfig loaded = load_scenario(path);
    CHECK(normalized_json(loaded) == normalized_json(cfg));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_scenario(path), ConfigError);
    const std::string bad = write_temp("bad.json", "{not json");
    CHECK_THROWS_AS(load_scenario(bad), ConfigError);
    std::remove(bad.c_str());
  }
}

TEST_CASE("model covariance matches the source and channel maps") {
  ScenarioConfig cfg;
  cfg.squeezing_db = 9.0;
  cfg.antisqueezing_db = 13.0;
  cfg.loss = 0.12;
  cfg.excess_noise = 0.03;
  const CovarianceMatrix direct = apply_loss_excess(
      two_mode_squeezed_source(9.0, 13.0), 0.12, 0.03);
  const CovarianceMatrix model = model_covariance(cfg);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(model(i, j) == doctest::Approx(direct(i, j)).epsilon(1e-15));
    }
  }
}

TEST_CASE("grid optimizer") {
  ScenarioConfig cfg;
  cfg.rounds_total = 1000000;
  cfg.grid_k_fractions = {0.25, 0.5};
  cfg.grid_deltas = {0.25, 0.5};
  cfg.grid_alphas = {32.0};

  SUBCASE("the winner attains the grid maximum") {
    StatsCache cache;
    const OptimizerOutcome best =
        optimize_parameters(cfg, cfg.rounds_total, cache);
    REQUIRE(best.feasible);
    CHECK(best.result.ell > 0);
    CHECK(best.n == cfg.rounds_total - best.k);

    // independent enumeration of the same grid
    long long max_ell = 0;
    for (double kf : cfg.grid_k_fractions) {
      for (double delta : cfg.grid_deltas) {
        ProtocolParams p;
        p.rounds_n_total = cfg.rounds_total;
        p.rounds_k = std::llround(kf * double(cfg.rounds_total));
        p.scheme = BinningScheme::bounded(32.0, delta);
        const BinnedChannelStats& stats = cache.get(cfg, p.scheme);
        p.d0 = set_abort_threshold(stats.distance, p.rounds_k, cfg.eps_robust);
        p.p_alpha = p_alpha_from_model(
            model_covariance(cfg).matrix().diagonal().maxCoeff(), 32.0);
        try {
          max_ell = std::max(
              max_ell,
              key_length_coherent(p, cfg.budget, stats, cfg.ec_efficiency).ell);
        } catch (const BudgetExhaustedError&) {
        }
      }
    }
    CHECK(best.result.ell == max_ell);
  }
  SUBCASE("deterministic outcome") {
    StatsCache cache;
    const OptimizerOutcome a = optimize_parameters(cfg, cfg.rounds_total, cache);
    const OptimizerOutcome b = optimize_parameters(cfg, cfg.rounds_total, cache);
    CHECK(a.result.ell == b.result.ell);
    CHECK(a.k_fraction == b.k_fraction);
    CHECK(a.delta == b.delta);
    CHECK(a.alpha == b.alpha);
  }
  SUBCASE("infeasible points name the binding constraint") {
    StatsCache cache;
    const OptimizerOutcome small = optimize_parameters(cfg, 100, cache);
    CHECK(!small.feasible);
    CHECK(small.result.ell == 0);
    CHECK(!small.binding_constraint.empty());
    CHECK(small.result.status.rfind("infeasible:", 0) == 0);
  }
  SUBCASE("collective and dw collapse the alpha axis") {
    cfg.grid_deltas = {0.1};
    cfg.grid_k_fractions = {0.1};
    StatsCache cache;
    for (AttackMode mode : {AttackMode::collective, AttackMode::dw}) {
      cfg.attack = mode;
      const OptimizerOutcome o =
          optimize_parameters(cfg, cfg.rounds_total, cache);
      CHECK(std::isinf(o.alpha));
      if (mode == AttackMode::dw && o.feasible) {
        CHECK(o.result.ell ==
              static_cast<long long>(
                  std::floor(o.result.rate * double(cfg.rounds_total))));
      }
    }
    // both unbounded analyses share the single (loss, delta, inf) entry
    CHECK(cache.size() == 1);
  }
}

TEST_CASE("sweeps") {
  ScenarioConfig cfg;
  cfg.attack = AttackMode::dw;
  cfg.rounds_total = 1000000;
  cfg.sweep_axis = "loss";
  cfg.sweep_values = {0.0, 0.1, 0.2};
  cfg.grid_k_fractions = {0.1};
  cfg.grid_deltas = {0.1};

  SUBCASE("loss sweep is monotone for the asymptotic rate") {
    const std::vector<SweepRow> rows = sweep(cfg);
    REQUIRE(rows.size() == 3);
    for (const SweepRow& row : rows) {
      CHECK(row.error.empty());
      CHECK(row.outcome.feasible);
    }
    CHECK(rows[0].outcome.result.rate > rows[1].outcome.result.rate);
    CHECK(rows[1].outcome.result.rate > rows[2].outcome.result.rate);
  }
  SUBCASE("csv output is stable and fully labeled") {
    const std::vector<SweepRow> rows = sweep(cfg);
    const std::string csv = sweep_csv(cfg, rows);
    const std::string header =
        "axis,axis_value,attack,feasible,ell,rate,k_fraction,k,n,delta,"
        "alpha,d0,uncertainty_bits,max_entropy_bits,cond_entropy_bits,"
        "aep_bits,leak_ec_bits,correctness_bits,pa_bits,mu,raw_sum,"
        "secrecy_eps,status,error\n";
    CHECK(csv.rfind(header, 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("dw") != std::string::npos);
    CHECK(csv.find("inf") != std::string::npos);  // unbounded alpha column
    CHECK(sweep_csv(cfg, sweep(cfg)) == csv);
  }
  SUBCASE("rounds sweep records infeasible points without failing") {
    cfg.attack = AttackMode::coherent;
    cfg.grid_alphas = {32.0};
    cfg.grid_deltas = {0.25};
    cfg.grid_k_fractions = {0.5};
    cfg.sweep_axis = "rounds";
    cfg.sweep_values = {2, 1000000};
    const std::vector<SweepRow> rows = sweep(cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].error.empty());
    CHECK(!rows[0].outcome.feasible);
    CHECK(rows[1].outcome.feasible);
  }
  SUBCASE("empty sweep values are rejected") {
    cfg.sweep_values = {};
    CHECK_THROWS_AS(sweep(cfg), ConfigError);
  }
}
