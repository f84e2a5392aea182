#pragma once

#include "cvqkd/coherent.hpp"
#include "cvqkd/gaussian.hpp"

namespace cvqkd {

/// Two-mode covariance parameters (V_a, V_b, Z) of the block form
/// diag(V_a,V_a) / diag(V_b,V_b) with off-diagonal diag(Z,-Z).
struct CovarianceParams {
  double v_a = 0.0;
  double v_b = 0.0;
  double z = 0.0;

  CovarianceMatrix to_matrix() const;
};

/// Confidence region over (V_a, V_b, Z) at level 1 - eps_pe.
///
/// The construction is a stand-in for the external statistical results the
/// analysis normally defers to: per-parameter two-sided Gaussian-quantile
/// deviations with a union bound over 3 parameters x 2 sides, validated
/// empirically by coverage simulation.
struct ConfidenceBox {
  CovarianceParams center;
  CovarianceParams half_widths;
  long long sample_count = 0;
  double eps_pe = 0.0;
  bool out_of_validated_range = false;  // sample_count below 100
  bool corner_projected = false;        // some corner needed a physicality fix

  /// The 8 corners followed by the center, each projected to a physical
  /// matrix by shrinking |Z| where needed.
  std::vector<CovarianceParams> corners_and_center() const;
  /// Uniform grid over the box, points_per_axis^3 parameter triples.
  std::vector<CovarianceParams> grid(int points_per_axis) const;
};

/// AEP correction Delta = 4 log2(2^{H_max/2 + 1} + 1) sqrt(log2(2/eps^2)),
/// bits per sqrt(n).
double aep_delta(double eps_smooth, double hmax_xa);

/// Smallest n for which the AEP bound applies: n >= (8/5) log2(2/eps^2).
double aep_min_rounds(double eps_smooth);

/// Gaussian lower bound on H(X_A|E) per symbol:
/// H(E | q_A-homodyne) + H(X_A) - H(AB), clamped at 0 (H(X_A|E) >= 0 for a
/// classical X). Mode 0 of `gamma_ab` is measured.
double conditional_entropy_bound(const CovarianceMatrix& gamma_ab,
                                 const BinningScheme& scheme);

/// Confidence box around the (estimated) covariance parameters from m
/// estimation rounds.
ConfidenceBox build_confidence_box(const CovarianceParams& center,
                                   long long sample_count, double eps_pe);

/// Worst-case conditional entropy bound over the box (corners + center, with
/// an optional grid refinement; points_per_axis <= 1 means corners only).
double min_conditional_entropy_over_box(const ConfidenceBox& box,
                                        const BinningScheme& scheme,
                                        int grid_points_per_axis = 0);

/// Key length against collective Gaussian attacks:
/// ell = floor( n inf_box H(X_A|E) - sqrt(n) Delta - leak_EC - log2(2/eps_c)
///              - 2 log2(1/(2 eps_pa)) ), clamped at 0. The reported secrecy
/// parameter is eps_s + eps_pe. Estimation uses m = N + k rounds.
KeyRateResult key_length_collective(long long rounds_n_total, long long rounds_k,
                                    const BinningScheme& scheme,
                                    const SecurityBudget& budget,
                                    const CovarianceParams& model,
                                    const BinnedChannelStats& stats,
                                    double ec_efficiency);

/// Asymptotic Devetak-Winter rate for perfect reconciliation, bits/symbol:
/// conditional_entropy_bound - H(X_A|X_B).
double devetak_winter_rate(const CovarianceMatrix& gamma_ab,
                           const BinningScheme& scheme,
                           const BinnedChannelStats& stats);

}  // namespace cvqkd
