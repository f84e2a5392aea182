#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvqkd/coherent.hpp"
#include "cvqkd/gaussian.hpp"

namespace cvqkd {

/// Deterministic splittable RNG: the master seed plus a stage tag derive an
/// independent stream (splitmix64 over the hashed tag), so every protocol
/// stage is reproducible on its own. Generation is xoshiro256**.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view stage,
            std::uint64_t index = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  /// Standard normal (polar Box-Muller).
  double next_gaussian();
  /// Uniform in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Quadrature samples of the sifted rounds of one protocol run. Bob's phase
/// outcomes are sign-flipped at sampling so that matching-basis outcomes are
/// positively correlated for both bases.
struct SimulationRun {
  std::uint64_t seed = 0;
  long long rounds_raw = 0;  // rounds sampled before sifting
  std::vector<double> alice;
  std::vector<double> bob;
  std::vector<std::uint8_t> basis;  // 0 = q, 1 = p, per sifted round
  long long discarded = 0;
};

/// Per-round basis choices are independent uniform bits on both sides;
/// mismatched rounds are sampled and then discarded, mirroring sifting.
SimulationRun sample_protocol_rounds(const CovarianceMatrix& gamma_ab,
                                     long long rounds, std::uint64_t seed);

/// Bin the sifted outcomes of a run.
struct BinnedStrings {
  std::vector<long> alice;
  std::vector<long> bob;
};
BinnedStrings bin_run(const SimulationRun& run, const BinningScheme& scheme);

struct EstimationResult {
  bool pass = false;
  double d_pe = 0.0;
  double d_key = 0.0;
  double d_tot = 0.0;
  std::vector<std::uint32_t> pe_indices;  // the sampled k positions
};

/// Uniform random k-subset without replacement; pass iff d_pe <= d0.
EstimationResult run_parameter_estimation(const BinnedStrings& strings,
                                          long long k, double d0,
                                          std::uint64_t seed);

/// Empirical exceedance of {d_key >= d_pe + nu} over random k/n splits of a
/// fixed population of per-round distances, next to the analytic bound
/// exp(-2 nu^2 n k^2 / (|X|^2 N (k+1))).
struct SerflingCurve {
  std::vector<double> nu;
  std::vector<double> empirical;
  std::vector<double> bound;
  long trials = 0;
};
SerflingCurve serfling_experiment(long alphabet_size,
                                  const std::vector<double>& population,
                                  long long k, long long n, long trials,
                                  std::uint64_t seed,
                                  const std::vector<double>& nu_grid);

/// Exact |{x in Z^n : sum |x_i| <= n d0}| by dynamic programming.
/// Throws when the lattice ball exceeds 1e8 points.
unsigned long long counting_enumeration(int n, double d0);

/// Binary Toeplitz-matrix hash with a seed-derived first row/column.
std::vector<std::uint8_t> toeplitz_privacy_amplification(
    const std::vector<std::uint8_t>& raw_bits, long long out_len,
    std::uint64_t seed);

struct RunReport {
  int schema_version = 1;
  std::uint64_t seed = 0;
  long long rounds_raw = 0;
  long long sifted = 0;
  long long k = 0;
  long long n = 0;
  double d0 = 0.0;
  double d_pe = 0.0;
  double d_key = 0.0;
  double d_tot = 0.0;
  double expected_distance = 0.0;
  bool pass = false;
  long long ell = 0;
  std::string key_digest;  // FNV-1a 64 over the key bytes, hex
  std::optional<std::string> key_hex;
  std::string status = "ok";
};

struct EndToEndConfig {
  CovarianceMatrix gamma_ab;
  BinningScheme scheme;
  SecurityBudget budget;
  double ec_efficiency = 0.95;
  double p_alpha = 0.0;
  double k_fraction = 0.1;
  double eps_robust = 1e-3;
  std::optional<double> d0_override;
  bool emit_key = false;
};

/// Full pipeline: sample -> sift -> bin -> estimate -> hash (on pass).
/// Error correction is not decoded; the calculator's leak model already
/// charges the disclosed bits.
RunReport end_to_end_run(const EndToEndConfig& config, long long rounds,
                         std::uint64_t seed);

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace cvqkd
