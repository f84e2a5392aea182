#include "cvqkd/coherent.hpp"

#include <cmath>
#include <sstream>

namespace cvqkd {

void SecurityBudget::validate() const {
  const auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(eps_s) || !in_unit(eps_c) || !in_unit(eps_pe)) {
    throw std::invalid_argument("security budget: epsilons must lie in (0,1)");
  }
  if (!(smoothing_share > 0.0) || !(sampling_share > 0.0) ||
      !(pa_share > 0.0) ||
      smoothing_share + sampling_share + pa_share > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "security budget: shares must be positive and sum to at most 1");
  }
}

void ProtocolParams::validate() const {
  if (rounds_k <= 0 || rounds_k >= rounds_n_total) {
    throw std::invalid_argument("protocol params: need 0 < k < N");
  }
  if (!(d0 >= 0.0)) {
    throw std::invalid_argument("protocol params: d0 must be >= 0");
  }
  if (!(p_alpha >= 0.0) || !(p_alpha < 1.0)) {
    throw std::invalid_argument("protocol params: p_alpha must lie in [0,1)");
  }
}

double log2_gamma(double t) {
  if (t < 0.0) {
    throw std::invalid_argument("gamma: t must be nonnegative");
  }
  if (t == 0.0) {
    return 0.0;
  }
  const double root = std::sqrt(1.0 + t * t);
  // sqrt(1+t^2) - 1 = t^2 / (sqrt(1+t^2) + 1), stable for small t.
  const double rm1 = t * t / (root + 1.0);
  return std::log2(t + root) + t * (std::log2(t) - std::log2(rm1));
}

double gamma_fn(double t) { return std::exp2(log2_gamma(t)); }

double tail_correction_f(double p_alpha, long long n) {
  if (p_alpha < 0.0 || p_alpha > 1.0 || n < 1) {
    throw std::invalid_argument("tail_correction_f: invalid arguments");
  }
  // 1 - (1-p)^n via expm1 to survive p down to ~1e-300.
  const double one_minus_pow =
      -std::expm1(static_cast<double>(n) * std::log1p(-p_alpha));
  return std::sqrt(2.0 * one_minus_pow);
}

double p_alpha_from_model(double variance, double alpha) {
  if (!(variance > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("p_alpha_from_model: invalid arguments");
  }
  return 2.0 * normal_tail(alpha / std::sqrt(variance));
}

double mu_correction(const ProtocolParams& params, double eps_mu) {
  params.validate();
  if (eps_mu <= 0.0) {
    throw BudgetExhaustedError(
        "tail correction exhausts eps budget (alpha/p_alpha too loose)");
  }
  const double n_total = static_cast<double>(params.rounds_n_total);
  const double k = static_cast<double>(params.rounds_k);
  const double n = static_cast<double>(params.rounds_key());
  const double alphabet = static_cast<double>(params.scheme.alphabet_size());
  const double log_term = eps_mu >= 1.0 ? 0.0 : std::log(1.0 / eps_mu);
  return alphabet * std::sqrt(n_total * (k + 1.0) / (n * k * k) * log_term);
}

double leak_ec(long long n, const BinnedChannelStats& stats, double beta) {
  if (!(beta > 0.0) || beta > 1.0) {
    throw std::invalid_argument("leak_ec: efficiency must lie in (0,1]");
  }
  return static_cast<double>(n) *
         (stats.h_a - beta * std::max(stats.mutual_info, 0.0));
}

double set_abort_threshold(const DistanceMoments& distance, long long k,
                           double eps_robust) {
  if (k <= 0 || !(eps_robust > 0.0) || !(eps_robust < 1.0)) {
    throw std::invalid_argument("set_abort_threshold: invalid arguments");
  }
  const double z = eps_robust >= 0.5 ? 0.0 : normal_quantile(1.0 - eps_robust);
  return distance.mean +
         z * std::sqrt(std::max(distance.variance, 0.0) /
                       static_cast<double>(k));
}

KeyRateResult key_length_coherent(const ProtocolParams& params,
                                  const SecurityBudget& budget,
                                  const BinnedChannelStats& stats,
                                  double ec_efficiency) {
  params.validate();
  budget.validate();
  if (!params.scheme.finite()) {
    throw std::invalid_argument(
        "coherent analysis requires a finite binning scheme");
  }
  const long long n = params.rounds_key();

  const double f = tail_correction_f(params.p_alpha, n);
  const double eps_mu = budget.eps_sampling() - 2.0 * f;
  const double mu = mu_correction(params, eps_mu);

  KeyRateResult result;
  auto& b = result.breakdown;
  b.mu = mu;
  b.uncertainty_bits =
      static_cast<double>(n) * log2_inv_overlap(params.scheme.delta());
  b.max_entropy_bits = static_cast<double>(n) * log2_gamma(params.d0 + mu);
  b.leak_ec_bits = leak_ec(n, stats, ec_efficiency);
  b.correctness_bits = std::log2(2.0 / budget.eps_c);
  b.pa_bits = 2.0 * std::log2(1.0 / (2.0 * budget.eps_pa()));
  b.raw_sum = b.uncertainty_bits - b.max_entropy_bits - b.leak_ec_bits -
              b.correctness_bits - b.pa_bits;

  result.secrecy_eps = budget.eps_s;
  if (b.raw_sum <= 0.0) {
    result.ell = 0;
    result.rate = 0.0;
    std::ostringstream msg;
    msg << "no key: breakdown sums to " << b.raw_sum << " bits";
    result.status = msg.str();
  } else {
    result.ell = static_cast<long long>(std::floor(b.raw_sum));
    result.rate = static_cast<double>(result.ell) /
                  static_cast<double>(params.rounds_n_total);
  }
  return result;
}

}  // namespace cvqkd
