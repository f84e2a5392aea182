#include "cvqkd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cvqkd/collective.hpp"

namespace cvqkd {

namespace {

Eigen::Matrix2d measured_pair_block(const CovarianceMatrix& gamma) {
  Eigen::Matrix2d q_block;
  q_block << gamma(0, 0), gamma(0, 2), gamma(2, 0), gamma(2, 2);
  return q_block;
}

CovarianceParams model_params(const CovarianceMatrix& gamma) {
  return CovarianceParams{gamma(0, 0), gamma(2, 2), gamma(0, 2)};
}

bool better_than(const OptimizerOutcome& candidate,
                 const OptimizerOutcome& best) {
  // Strict improvement only: the scan order (k, then delta, then alpha,
  // each ascending) makes ties resolve to the smallest triple.
  if (!best.feasible) return candidate.feasible;
  return candidate.feasible && candidate.result.ell > best.result.ell;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const BinnedChannelStats& StatsCache::get(const ScenarioConfig& cfg,
                                          const BinningScheme& scheme) {
  const double alpha_key = scheme.finite()
                               ? scheme.alpha()
                               : std::numeric_limits<double>::infinity();
  const std::array<double, 4> key = {cfg.loss, cfg.excess_noise,
                                     scheme.delta(), alpha_key};
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const CovarianceMatrix gamma = model_covariance(cfg);
    it = cache_
             .emplace(key,
                      binned_channel_stats(measured_pair_block(gamma), scheme))
             .first;
  }
  return it->second;
}

OptimizerOutcome optimize_parameters(const ScenarioConfig& cfg,
                                     long long rounds_total,
                                     StatsCache& cache) {
  cfg.validate();
  if (rounds_total < 2) {
    throw ConfigError("optimize_parameters: rounds_total must be >= 2");
  }
  const CovarianceMatrix gamma = model_covariance(cfg);
  const double worst_variance = gamma.matrix().diagonal().maxCoeff();

  std::vector<double> k_fractions = cfg.grid_k_fractions;
  std::vector<double> deltas = cfg.grid_deltas;
  std::vector<double> alphas = cfg.grid_alphas;
  std::sort(k_fractions.begin(), k_fractions.end());
  std::sort(deltas.begin(), deltas.end());
  std::sort(alphas.begin(), alphas.end());
  if (cfg.attack != AttackMode::coherent) {
    alphas = {std::numeric_limits<double>::infinity()};
  }

  OptimizerOutcome best;
  std::string last_reason = "no grid points evaluated";
  for (double kf : k_fractions) {
    const long long k = std::llround(kf * static_cast<double>(rounds_total));
    if (k < 1 || k >= rounds_total) {
      last_reason = "k fraction leaves no key rounds";
      continue;
    }
    for (double delta : deltas) {
      for (double alpha : alphas) {
        OptimizerOutcome point;
        point.k_fraction = kf;
        point.delta = delta;
        point.alpha = alpha;
        point.k = k;
        point.n = rounds_total - k;
        try {
          const BinningScheme scheme =
              std::isinf(alpha) ? BinningScheme::unbounded(delta)
                                : BinningScheme::bounded(alpha, delta);
          const BinnedChannelStats& stats = cache.get(cfg, scheme);
          switch (cfg.attack) {
            case AttackMode::coherent: {
              ProtocolParams params;
              params.rounds_n_total = rounds_total;
              params.rounds_k = k;
              params.scheme = scheme;
              params.d0 = set_abort_threshold(stats.distance, k,
                                              cfg.eps_robust);
              params.p_alpha = p_alpha_from_model(worst_variance, alpha);
              point.d0 = params.d0;
              point.result = key_length_coherent(params, cfg.budget, stats,
                                                 cfg.ec_efficiency);
              break;
            }
            case AttackMode::collective: {
              point.result = key_length_collective(
                  rounds_total, k, scheme, cfg.budget, model_params(gamma),
                  stats, cfg.ec_efficiency);
              break;
            }
            case AttackMode::dw: {
              const double rate = devetak_winter_rate(gamma, scheme, stats);
              point.result.rate = rate;
              point.result.ell = std::max<long long>(
                  0, static_cast<long long>(std::floor(
                         rate * static_cast<double>(rounds_total))));
              point.result.secrecy_eps = 0.0;
              point.result.status =
                  rate > 0 ? "ok" : "no key: rate not positive";
              break;
            }
          }
        } catch (const BudgetExhaustedError& e) {
          last_reason = e.what();
          continue;
        } catch (const std::invalid_argument& e) {
          last_reason = e.what();
          continue;
        }
        point.feasible = point.result.ell > 0;
        if (!point.feasible) {
          last_reason = point.result.status;
        }
        if (better_than(point, best)) {
          best = point;
        }
      }
    }
  }
  if (!best.feasible) {
    best.result.ell = 0;
    best.result.rate = 0.0;
    best.binding_constraint = last_reason;
    best.result.status = "infeasible: " + last_reason;
  }
  return best;
}

std::vector<SweepRow> sweep(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.sweep_values.empty()) {
    throw ConfigError("sweep: sweep_values is empty");
  }
  StatsCache cache;
  std::vector<SweepRow> rows;
  rows.reserve(cfg.sweep_values.size());
  for (double value : cfg.sweep_values) {
    SweepRow row;
    row.axis_value = value;
    ScenarioConfig point_cfg = cfg;
    long long rounds = cfg.rounds_total;
    if (cfg.sweep_axis == "loss") {
      point_cfg.loss = value;
    } else {
      rounds = std::llround(value);
    }
    try {
      row.outcome = optimize_parameters(point_cfg, rounds, cache);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const ScenarioConfig& cfg,
                      const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "axis,axis_value,attack,feasible,ell,rate,k_fraction,k,n,delta,"
         "alpha,d0,uncertainty_bits,max_entropy_bits,cond_entropy_bits,"
         "aep_bits,leak_ec_bits,correctness_bits,pa_bits,mu,raw_sum,"
         "secrecy_eps,status,error\n";
  for (const SweepRow& row : rows) {
    const OptimizerOutcome& o = row.outcome;
    const KeyRateBreakdown& b = o.result.breakdown;
    std::string status = row.error.empty() ? o.result.status : "error";
    std::replace(status.begin(), status.end(), ',', ';');
    std::string error = row.error;
    std::replace(error.begin(), error.end(), ',', ';');
    out << cfg.sweep_axis << ',' << format_double(row.axis_value) << ','
        << to_string(cfg.attack) << ',' << (o.feasible ? 1 : 0) << ','
        << o.result.ell << ',' << format_double(o.result.rate) << ','
        << format_double(o.k_fraction) << ',' << o.k << ',' << o.n << ','
        << format_double(o.delta) << ',' << format_double(o.alpha) << ','
        << format_double(o.d0) << ',' << format_double(b.uncertainty_bits)
        << ',' << format_double(b.max_entropy_bits) << ','
        << format_double(b.cond_entropy_bits) << ','
        << format_double(b.aep_bits) << ',' << format_double(b.leak_ec_bits)
        << ',' << format_double(b.correctness_bits) << ','
        << format_double(b.pa_bits) << ',' << format_double(b.mu) << ','
        << format_double(b.raw_sum) << ','
        << format_double(o.result.secrecy_eps) << ',' << status << ','
        << error << '\n';
  }
  return out.str();
}

}  // namespace cvqkd
