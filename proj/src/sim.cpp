#include "cvqkd/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cvqkd {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

struct Cholesky2 {
  double l11 = 0.0;
  double l21 = 0.0;
  double l22 = 0.0;
};

Cholesky2 cholesky2(double v1, double c, double v2) {
  Cholesky2 l;
  l.l11 = std::sqrt(v1);
  l.l21 = c / l.l11;
  l.l22 = std::sqrt(std::max(v2 - l.l21 * l.l21, 0.0));
  return l;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view stage,
                     std::uint64_t index) {
  std::uint64_t s =
      master_seed ^ fnv1a64(stage) ^ (index * 0xd1342543de82ef95ULL);
  for (auto& word : state_) {
    word = splitmix64(s);
  }
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u;
  double v;
  double s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("next_below: bound must be positive");
  }
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

SimulationRun sample_protocol_rounds(const CovarianceMatrix& gamma_ab,
                                     long long rounds, std::uint64_t seed) {
  if (gamma_ab.modes() != 2) {
    throw std::invalid_argument("sample_protocol_rounds: need a 2-mode state");
  }
  if (rounds <= 0) {
    throw std::invalid_argument("sample_protocol_rounds: rounds must be > 0");
  }
  // Bob's p outcomes are sign-flipped, so the pp covariance uses -Gamma(1,3).
  const Cholesky2 chol[2][2] = {
      {cholesky2(gamma_ab(0, 0), gamma_ab(0, 2), gamma_ab(2, 2)),
       cholesky2(gamma_ab(0, 0), -gamma_ab(0, 3), gamma_ab(3, 3))},
      {cholesky2(gamma_ab(1, 1), gamma_ab(1, 2), gamma_ab(2, 2)),
       cholesky2(gamma_ab(1, 1), -gamma_ab(1, 3), gamma_ab(3, 3))}};

  RngStream basis_rng(seed, "basis");
  RngStream value_rng(seed, "quadrature");
  SimulationRun run;
  run.seed = seed;
  run.rounds_raw = rounds;
  for (long long i = 0; i < rounds; ++i) {
    const int ba = static_cast<int>(basis_rng.next_below(2));
    const int bb = static_cast<int>(basis_rng.next_below(2));
    const double z1 = value_rng.next_gaussian();
    const double z2 = value_rng.next_gaussian();
    if (ba != bb) {
      ++run.discarded;
      continue;
    }
    const Cholesky2& l = chol[ba][bb];
    run.alice.push_back(l.l11 * z1);
    run.bob.push_back(l.l21 * z1 + l.l22 * z2);
    run.basis.push_back(static_cast<std::uint8_t>(ba));
  }
  return run;
}

BinnedStrings bin_run(const SimulationRun& run, const BinningScheme& scheme) {
  BinnedStrings out;
  out.alice.reserve(run.alice.size());
  out.bob.reserve(run.bob.size());
  for (double x : run.alice) out.alice.push_back(scheme.bin_of(x));
  for (double x : run.bob) out.bob.push_back(scheme.bin_of(x));
  return out;
}

EstimationResult run_parameter_estimation(const BinnedStrings& strings,
                                          long long k, double d0,
                                          std::uint64_t seed) {
  const long long total = static_cast<long long>(strings.alice.size());
  if (strings.bob.size() != strings.alice.size()) {
    throw std::invalid_argument("parameter estimation: string length mismatch");
  }
  if (k <= 0 || k >= total) {
    throw std::invalid_argument("parameter estimation: need 0 < k < length");
  }
  std::vector<std::uint32_t> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0u);
  RngStream rng(seed, "pe-sample");
  for (long long i = 0; i < k; ++i) {
    const std::uint64_t j =
        i + rng.next_below(static_cast<std::uint64_t>(total - i));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  std::vector<char> in_pe(static_cast<size_t>(total), 0);
  EstimationResult result;
  result.pe_indices.assign(idx.begin(), idx.begin() + k);
  std::sort(result.pe_indices.begin(), result.pe_indices.end());
  for (long long i = 0; i < k; ++i) {
    in_pe[idx[static_cast<size_t>(i)]] = 1;
  }
  long long sum_pe = 0;
  long long sum_key = 0;
  for (long long i = 0; i < total; ++i) {
    const long long d =
        std::llabs(static_cast<long long>(strings.alice[static_cast<size_t>(i)]) -
                   static_cast<long long>(strings.bob[static_cast<size_t>(i)]));
    if (in_pe[static_cast<size_t>(i)]) {
      sum_pe += d;
    } else {
      sum_key += d;
    }
  }
  result.d_pe = static_cast<double>(sum_pe) / static_cast<double>(k);
  result.d_key =
      static_cast<double>(sum_key) / static_cast<double>(total - k);
  result.d_tot =
      static_cast<double>(sum_pe + sum_key) / static_cast<double>(total);
  result.pass = result.d_pe <= d0;
  return result;
}

SerflingCurve serfling_experiment(long alphabet_size,
                                  const std::vector<double>& population,
                                  long long k, long long n, long trials,
                                  std::uint64_t seed,
                                  const std::vector<double>& nu_grid) {
  const long long total = k + n;
  if (static_cast<long long>(population.size()) != total) {
    throw std::invalid_argument("serfling: population must have k + n entries");
  }
  if (trials < 1) {
    throw std::invalid_argument("serfling: need at least one trial");
  }
  SerflingCurve curve;
  curve.nu = nu_grid;
  curve.trials = trials;
  curve.empirical.assign(nu_grid.size(), 0.0);
  curve.bound.resize(nu_grid.size());
  const double x = static_cast<double>(alphabet_size);
  for (size_t i = 0; i < nu_grid.size(); ++i) {
    const double nu = nu_grid[i];
    const double exponent = -2.0 * nu * nu * static_cast<double>(n) *
                            static_cast<double>(k) * static_cast<double>(k) /
                            (x * x * static_cast<double>(total) *
                             (static_cast<double>(k) + 1.0));
    curve.bound[i] = std::min(1.0, std::exp(exponent));
  }

  std::vector<std::uint32_t> idx(population.size());
  for (long t = 0; t < trials; ++t) {
    std::iota(idx.begin(), idx.end(), 0u);
    RngStream rng(seed, "serfling", static_cast<std::uint64_t>(t));
    for (long long i = 0; i < k; ++i) {
      const std::uint64_t j =
          i + rng.next_below(static_cast<std::uint64_t>(total - i));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    double sum_pe = 0.0;
    double sum_all = 0.0;
    for (double d : population) sum_all += d;
    for (long long i = 0; i < k; ++i) sum_pe += population[idx[static_cast<size_t>(i)]];
    const double d_pe = sum_pe / static_cast<double>(k);
    const double d_key = (sum_all - sum_pe) / static_cast<double>(n);
    for (size_t i = 0; i < nu_grid.size(); ++i) {
      if (d_key >= d_pe + nu_grid[i]) {
        curve.empirical[i] += 1.0;
      }
    }
  }
  for (double& e : curve.empirical) e /= static_cast<double>(trials);
  return curve;
}

unsigned long long counting_enumeration(int n, double d0) {
  if (n < 1 || n > 10) {
    throw std::invalid_argument("counting_enumeration: need 1 <= n <= 10");
  }
  if (!(d0 >= 0.0)) {
    throw std::invalid_argument("counting_enumeration: d0 must be >= 0");
  }
  const long long s_max = static_cast<long long>(
      std::floor(static_cast<double>(n) * d0 + 1e-9));
  // w[s] = #{x in Z^j : sum |x_i| = s}, built one coordinate at a time.
  std::vector<unsigned long long> w(static_cast<size_t>(s_max) + 1, 0);
  w[0] = 1;
  for (int j = 0; j < n; ++j) {
    std::vector<unsigned long long> next(w.size(), 0);
    for (long long s = 0; s <= s_max; ++s) {
      unsigned long long acc = 0;
      for (long long t = 0; t <= s; ++t) {
        acc += w[static_cast<size_t>(s - t)] * (t == 0 ? 1ULL : 2ULL);
      }
      next[static_cast<size_t>(s)] = acc;
    }
    w = std::move(next);
  }
  unsigned long long count = 0;
  for (unsigned long long v : w) {
    count += v;
    if (count > 100'000'000ULL) {
      throw std::invalid_argument("counting_enumeration: size guard exceeded");
    }
  }
  return count;
}

std::vector<std::uint8_t> toeplitz_privacy_amplification(
    const std::vector<std::uint8_t>& raw_bits, long long out_len,
    std::uint64_t seed) {
  const long long n = static_cast<long long>(raw_bits.size());
  if (out_len < 0 || out_len > n) {
    throw std::invalid_argument(
        "toeplitz: output length must lie in [0, raw length]");
  }
  if (out_len == 0) {
    return {};
  }
  // T_{i,j} = r[i - j + n - 1]; out_i = parity_m rawrev[m] & r[i + m]
  // with rawrev the input reversed.
  const long long r_bits = n + out_len - 1;
  const size_t r_words = static_cast<size_t>((r_bits + 63) / 64) + 1;
  std::vector<std::uint64_t> r(r_words, 0);
  RngStream rng(seed, "toeplitz");
  for (size_t w = 0; w + 1 < r_words; ++w) {
    r[w] = rng.next_u64();
  }
  const size_t n_words = static_cast<size_t>((n + 63) / 64);
  std::vector<std::uint64_t> rawrev(n_words, 0);
  for (long long m = 0; m < n; ++m) {
    if (raw_bits[static_cast<size_t>(n - 1 - m)] & 1) {
      rawrev[static_cast<size_t>(m / 64)] |= 1ULL << (m % 64);
    }
  }
  std::vector<std::uint8_t> out(static_cast<size_t>(out_len), 0);
  for (long long i = 0; i < out_len; ++i) {
    const size_t q = static_cast<size_t>(i / 64);
    const int b = static_cast<int>(i % 64);
    std::uint64_t acc = 0;
    for (size_t w = 0; w < n_words; ++w) {
      std::uint64_t window = r[q + w] >> b;
      if (b != 0) {
        window |= r[q + w + 1] << (64 - b);
      }
      acc ^= rawrev[w] & window;
    }
    // mask padding bits of the final word
    out[static_cast<size_t>(i)] =
        static_cast<std::uint8_t>(std::popcount(acc) & 1);
  }
  return out;
}

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

RunReport end_to_end_run(const EndToEndConfig& config, long long rounds,
                         std::uint64_t seed) {
  RunReport report;
  report.seed = seed;
  report.rounds_raw = rounds;

  const SimulationRun run = sample_protocol_rounds(config.gamma_ab, rounds, seed);
  report.sifted = static_cast<long long>(run.alice.size());
  if (report.sifted < 10) {
    report.status = "sampling: too few sifted rounds";
    return report;
  }
  const BinnedStrings strings = bin_run(run, config.scheme);

  const long long k = std::max<long long>(
      1, std::llround(config.k_fraction * static_cast<double>(report.sifted)));
  report.k = std::min(k, report.sifted - 1);
  report.n = report.sifted - report.k;

  Eigen::Matrix2d q_block;
  q_block << config.gamma_ab(0, 0), config.gamma_ab(0, 2),
      config.gamma_ab(2, 0), config.gamma_ab(2, 2);
  const BinnedChannelStats stats =
      binned_channel_stats(q_block, config.scheme);
  report.expected_distance = stats.distance.mean;
  report.d0 = config.d0_override.value_or(
      set_abort_threshold(stats.distance, report.k, config.eps_robust));

  ProtocolParams params;
  params.rounds_n_total = report.sifted;
  params.rounds_k = report.k;
  params.scheme = config.scheme;
  params.d0 = report.d0;
  params.p_alpha =
      config.p_alpha > 0.0
          ? config.p_alpha
          : p_alpha_from_model(config.gamma_ab.matrix().diagonal().maxCoeff(),
                               config.scheme.alpha());

  long long ell = 0;
  try {
    const KeyRateResult rate =
        key_length_coherent(params, config.budget, stats, config.ec_efficiency);
    ell = rate.ell;
  } catch (const BudgetExhaustedError& e) {
    report.status = std::string("key length: ") + e.what();
  }

  const EstimationResult est =
      run_parameter_estimation(strings, report.k, report.d0, seed);
  report.d_pe = est.d_pe;
  report.d_key = est.d_key;
  report.d_tot = est.d_tot;
  report.pass = est.pass;
  if (!est.pass) {
    report.ell = 0;
    if (report.status == "ok") report.status = "aborted: d_pe above threshold";
    return report;
  }
  report.ell = ell;
  if (ell == 0) {
    return report;
  }

  // Pack the key-part symbols into bits and hash down to ell.
  const int bits_per_symbol = std::max(
      1, static_cast<int>(std::ceil(std::log2(
             static_cast<double>(config.scheme.alphabet_size())))));
  std::vector<std::uint8_t> raw_bits;
  raw_bits.reserve(static_cast<size_t>(report.n) * bits_per_symbol);
  size_t pe_cursor = 0;
  for (size_t i = 0; i < strings.alice.size(); ++i) {
    if (pe_cursor < est.pe_indices.size() &&
        est.pe_indices[pe_cursor] == i) {
      ++pe_cursor;
      continue;
    }
    const unsigned long sym = static_cast<unsigned long>(strings.alice[i]);
    for (int b = 0; b < bits_per_symbol; ++b) {
      raw_bits.push_back(static_cast<std::uint8_t>((sym >> b) & 1));
    }
  }
  const long long hash_len =
      std::min<long long>(ell, static_cast<long long>(raw_bits.size()));
  const std::vector<std::uint8_t> key =
      toeplitz_privacy_amplification(raw_bits, hash_len, seed);
  std::vector<std::uint8_t> key_bytes((key.size() + 7) / 8, 0);
  for (size_t i = 0; i < key.size(); ++i) {
    if (key[i]) key_bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  report.key_digest = fnv1a_hex(key_bytes);
  if (config.emit_key) {
    std::ostringstream hex;
    hex << std::hex;
    for (std::uint8_t b : key_bytes) {
      hex.width(2);
      hex.fill('0');
      hex << static_cast<int>(b);
    }
    report.key_hex = hex.str();
  }
  return report;
}

}  // namespace cvqkd
