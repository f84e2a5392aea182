#include "cvqkd/collective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cvqkd {

namespace {

bool params_physical(const CovarianceParams& p) {
  if (!(p.v_a >= kVacuumVariance) || !(p.v_b >= kVacuumVariance)) {
    return false;
  }
  // Positive semidefiniteness must be checked separately: the symplectic
  // spectrum of this standard form only sees det = (v_a v_b - z^2)^2 and is
  // blind to the sign of v_a v_b - z^2.
  if (p.z * p.z > p.v_a * p.v_b) {
    return false;
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 4);
  g(0, 0) = g(1, 1) = p.v_a;
  g(2, 2) = g(3, 3) = p.v_b;
  g(0, 2) = g(2, 0) = p.z;
  g(1, 3) = g(3, 1) = -p.z;
  const auto nus = symplectic_eigenvalues_of(g);
  return nus.back() >= kVacuumVariance - 1e-9;
}

// Shrinks |Z| toward zero until the matrix is physical. Weakening the
// correlations is the conservative direction for the key rate.
CovarianceParams project_physical(const CovarianceParams& p, bool* projected) {
  CovarianceParams out = p;
  out.v_a = std::max(out.v_a, kVacuumVariance);
  out.v_b = std::max(out.v_b, kVacuumVariance);
  if (params_physical(out)) {
    if (projected && (out.v_a != p.v_a || out.v_b != p.v_b)) *projected = true;
    return out;
  }
  if (projected) *projected = true;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    CovarianceParams trial = out;
    trial.z = out.z * mid;
    if (params_physical(trial)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.z *= lo;
  return out;
}

}  // namespace

CovarianceMatrix CovarianceParams::to_matrix() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 4);
  g(0, 0) = g(1, 1) = v_a;
  g(2, 2) = g(3, 3) = v_b;
  g(0, 2) = g(2, 0) = z;
  g(1, 3) = g(3, 1) = -z;
  return CovarianceMatrix(std::move(g));
}

std::vector<CovarianceParams> ConfidenceBox::corners_and_center() const {
  std::vector<CovarianceParams> pts;
  pts.reserve(9);
  for (int sa : {-1, 1}) {
    for (int sb : {-1, 1}) {
      for (int sz : {-1, 1}) {
        pts.push_back(project_physical({center.v_a + sa * half_widths.v_a,
                                        center.v_b + sb * half_widths.v_b,
                                        center.z + sz * half_widths.z},
                                       nullptr));
      }
    }
  }
  pts.push_back(center);
  return pts;
}

std::vector<CovarianceParams> ConfidenceBox::grid(int points_per_axis) const {
  std::vector<CovarianceParams> pts;
  const int n = std::max(points_per_axis, 2);
  pts.reserve(static_cast<size_t>(n) * n * n);
  for (int ia = 0; ia < n; ++ia) {
    for (int ib = 0; ib < n; ++ib) {
      for (int iz = 0; iz < n; ++iz) {
        const auto frac = [n](int i) {
          return -1.0 + 2.0 * static_cast<double>(i) / (n - 1);
        };
        pts.push_back({center.v_a + frac(ia) * half_widths.v_a,
                       center.v_b + frac(ib) * half_widths.v_b,
                       center.z + frac(iz) * half_widths.z});
      }
    }
  }
  return pts;
}

double aep_delta(double eps_smooth, double hmax_xa) {
  if (!(eps_smooth > 0.0) || !(eps_smooth < 1.0)) {
    throw std::invalid_argument("aep_delta: eps_smooth must lie in (0,1)");
  }
  const double log_term = std::log2(2.0 / (eps_smooth * eps_smooth));
  return 4.0 * std::log2(std::exp2(0.5 * hmax_xa + 1.0) + 1.0) *
         std::sqrt(log_term);
}

double aep_min_rounds(double eps_smooth) {
  return 1.6 * std::log2(2.0 / (eps_smooth * eps_smooth));
}

double conditional_entropy_bound(const CovarianceMatrix& gamma_ab,
                                 const BinningScheme& scheme) {
  const CovarianceMatrix purified = gaussian_purification(gamma_ab);
  const CovarianceMatrix conditioned =
      condition_on_homodyne(purified, /*measured_mode=*/0, Quadrature::q);
  // After removing measured mode 0, the purifying modes sit at the end.
  const int m = gamma_ab.modes();
  std::vector<int> env_modes;
  for (int i = m - 1; i < 2 * m - 1; ++i) {
    env_modes.push_back(i);
  }
  const double h_env = gaussian_entropy(conditioned.marginal(env_modes));
  const double h_xa =
      shannon_entropy(bin_probabilities(gamma_ab(0, 0), scheme));
  const double h_ab = gaussian_entropy(gamma_ab);
  return std::max(h_env + h_xa - h_ab, 0.0);
}

ConfidenceBox build_confidence_box(const CovarianceParams& center,
                                   long long sample_count, double eps_pe) {
  if (sample_count < 2) {
    throw std::invalid_argument("confidence box: need at least 2 samples");
  }
  if (!(eps_pe > 0.0) || eps_pe > 1.0) {
    throw std::invalid_argument("confidence box: eps_pe must lie in (0,1]");
  }
  ConfidenceBox box;
  box.center = center;
  box.sample_count = sample_count;
  box.eps_pe = eps_pe;
  box.out_of_validated_range = sample_count < 100;

  const double m = static_cast<double>(sample_count);
  const double z =
      eps_pe >= 1.0 ? 0.0 : normal_quantile(1.0 - eps_pe / 6.0);
  box.half_widths.v_a = z * std::sqrt(2.0 / m) * center.v_a;
  box.half_widths.v_b = z * std::sqrt(2.0 / m) * center.v_b;
  box.half_widths.z =
      z * std::sqrt((center.v_a * center.v_b + center.z * center.z) / m);

  bool projected = false;
  for (const auto& corner : box.corners_and_center()) {
    project_physical(corner, &projected);
  }
  box.corner_projected = projected;
  return box;
}

double min_conditional_entropy_over_box(const ConfidenceBox& box,
                                        const BinningScheme& scheme,
                                        int grid_points_per_axis) {
  std::vector<CovarianceParams> pts = box.corners_and_center();
  if (grid_points_per_axis > 1) {
    const auto extra = box.grid(grid_points_per_axis);
    pts.insert(pts.end(), extra.begin(), extra.end());
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& raw : pts) {
    const CovarianceParams p = project_physical(raw, nullptr);
    best = std::min(best, conditional_entropy_bound(p.to_matrix(), scheme));
  }
  return best;
}

KeyRateResult key_length_collective(long long rounds_n_total,
                                    long long rounds_k,
                                    const BinningScheme& scheme,
                                    const SecurityBudget& budget,
                                    const CovarianceParams& model,
                                    const BinnedChannelStats& stats,
                                    double ec_efficiency) {
  budget.validate();
  if (rounds_k <= 0 || rounds_k >= rounds_n_total) {
    throw std::invalid_argument("key_length_collective: need 0 < k < N");
  }
  const long long n = rounds_n_total - rounds_k;
  const double eps_smooth = budget.eps_smooth();
  if (static_cast<double>(n) < aep_min_rounds(eps_smooth)) {
    throw std::invalid_argument(
        "key_length_collective: n below the AEP validity threshold");
  }

  // Estimation data: the k sampled rounds plus the unsifted half, m = N + k.
  const long long sample_count = rounds_n_total + rounds_k;
  const ConfidenceBox box =
      build_confidence_box(model, sample_count, budget.eps_pe);
  const double worst_bound = min_conditional_entropy_over_box(box, scheme);

  KeyRateResult result;
  auto& b = result.breakdown;
  b.cond_entropy_bits = static_cast<double>(n) * worst_bound;
  b.aep_bits = std::sqrt(static_cast<double>(n)) *
               aep_delta(eps_smooth, stats.renyi_half_a);
  b.leak_ec_bits = leak_ec(n, stats, ec_efficiency);
  b.correctness_bits = std::log2(2.0 / budget.eps_c);
  b.pa_bits = 2.0 * std::log2(1.0 / (2.0 * budget.eps_pa()));
  b.raw_sum = b.cond_entropy_bits - b.aep_bits - b.leak_ec_bits -
              b.correctness_bits - b.pa_bits;

  result.secrecy_eps = budget.eps_s + budget.eps_pe;
  if (b.raw_sum <= 0.0) {
    result.ell = 0;
    result.rate = 0.0;
    std::ostringstream msg;
    msg << "no key: breakdown sums to " << b.raw_sum << " bits";
    result.status = msg.str();
  } else {
    result.ell = static_cast<long long>(std::floor(b.raw_sum));
    result.rate = static_cast<double>(result.ell) /
                  static_cast<double>(rounds_n_total);
  }
  return result;
}

double devetak_winter_rate(const CovarianceMatrix& gamma_ab,
                           const BinningScheme& scheme,
                           const BinnedChannelStats& stats) {
  return conditional_entropy_bound(gamma_ab, scheme) - stats.h_a_given_b;
}

}  // namespace cvqkd
