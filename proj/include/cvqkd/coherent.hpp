#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cvqkd/discretization.hpp"

namespace cvqkd {

/// Raised when the tail correction f(p_alpha, n) uses up the sampling share
/// of the secrecy budget (alpha chosen too small for the round count).
struct BudgetExhaustedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The epsilon parameters and how the secrecy budget is allocated.
/// Shares are fractions of eps_s: smoothing eps_s/2, sampling eps_s/4,
/// privacy amplification eps_s/4 by default.
struct SecurityBudget {
  double eps_s = 1e-6;
  double eps_c = 1e-6;
  double eps_pe = 1e-6;  // parameter-estimation confidence (collective only)
  double smoothing_share = 0.5;
  double sampling_share = 0.25;
  double pa_share = 0.25;

  double eps_smooth() const { return eps_s * smoothing_share; }
  double eps_sampling() const { return eps_s * sampling_share; }
  double eps_pa() const { return eps_s * pa_share; }

  void validate() const;
};

struct ProtocolParams {
  long long rounds_n_total = 0;  // N, sifted rounds
  long long rounds_k = 0;        // parameter-estimation rounds
  BinningScheme scheme = BinningScheme::unbounded(0.01);
  double d0 = 0.0;               // abort threshold, bin units
  double p_alpha = 0.0;          // per-round tail-probability bound

  long long rounds_key() const { return rounds_n_total - rounds_k; }  // n
  void validate() const;
};

struct KeyRateBreakdown {
  double uncertainty_bits = 0.0;   // n * log2(1/c)
  double max_entropy_bits = 0.0;   // n * log2 gamma(d0 + mu)  (coherent)
  double cond_entropy_bits = 0.0;  // n * worst-case H(X_A|E)  (collective)
  double aep_bits = 0.0;           // sqrt(n) * Delta          (collective)
  double leak_ec_bits = 0.0;
  double correctness_bits = 0.0;   // log2(2/eps_c)
  double pa_bits = 0.0;            // 2 * log2(1/(2 eps_pa))
  double mu = 0.0;                 // sampling correction, bin units
  double raw_sum = 0.0;            // signed sum before flooring
};

struct KeyRateResult {
  long long ell = 0;   // key length in bits, >= 0
  double rate = 0.0;   // ell / N
  KeyRateBreakdown breakdown;
  double secrecy_eps = 0.0;  // eps_s (+ eps_pe for collective)
  std::string status = "ok";
};

/// gamma(t) = (t + sqrt(1+t^2)) * (t / (sqrt(1+t^2)-1))^t, gamma(0) = 1.
double gamma_fn(double t);
double log2_gamma(double t);

/// f(p_alpha, n) = sqrt(2 (1 - (1-p_alpha)^n)).
double tail_correction_f(double p_alpha, long long n);

/// Upper bound on P(|outcome| > alpha) for a zero-mean Gaussian quadrature
/// with the given (worst-case) variance.
double p_alpha_from_model(double variance, double alpha);

/// Serfling sampling correction (bin units):
/// mu = |X| sqrt( N(k+1)/(n k^2) * ln(1/eps_mu) ), eps_mu = eps_sampling -
/// 2 f(p_alpha, n). The inner log is natural, the bound comes from an
/// exponential tail. Throws BudgetExhaustedError when eps_mu <= 0.
double mu_correction(const ProtocolParams& params, double eps_mu);

/// leak_EC = n (H(X_A) - beta I(X_A;X_B)); the correctness-hash cost is
/// charged in the key-length formula, not here.
double leak_ec(long long n, const BinnedChannelStats& stats, double beta);

/// Honest-party abort threshold: expected distance plus a Gaussian margin
/// targeting abort probability <= eps_robust (a robustness policy, not part
/// of the security statement).
double set_abort_threshold(const DistanceMoments& distance, long long k,
                           double eps_robust);

/// Key length against coherent attacks:
/// ell = floor( n [log2 1/c(delta) - log2 gamma(d0+mu)] - leak_EC
///              - log2(2/eps_c) - 2 log2(1/(2 eps_pa)) ), clamped at 0.
KeyRateResult key_length_coherent(const ProtocolParams& params,
                                  const SecurityBudget& budget,
                                  const BinnedChannelStats& stats,
                                  double ec_efficiency);

}  // namespace cvqkd
