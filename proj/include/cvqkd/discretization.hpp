#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

namespace cvqkd {

/// Interval partition of the outcome range into bins of width delta.
///
/// Finite case (alpha < inf): bins I_1 = (-inf, -alpha+delta], ...,
/// I_M = (alpha-delta, inf) with M = 2*alpha/delta. The unbounded case
/// (alpha = inf) uses the same lattice of width-delta intervals
/// (k*delta, (k+1)*delta], indexed by integers, truncated in computations
/// at +-12 sigma with the residual mass folded into the end bins.
class BinningScheme {
 public:
  static BinningScheme bounded(double alpha, double delta);
  static BinningScheme unbounded(double delta);

  bool finite() const { return std::isfinite(alpha_); }
  double alpha() const { return alpha_; }
  double delta() const { return delta_; }
  /// M = 2*alpha/delta; throws for the unbounded scheme.
  long alphabet_size() const;
  /// alpha/delta in the finite case.
  long half_bins() const { return half_bins_; }

  /// Maps a lattice bin index (interval (k d, (k+1) d]) to the scheme's
  /// 0-based alphabet index: identity shift for the unbounded scheme,
  /// end-bin clamping for the finite one.
  long fold_lattice_index(long k) const;
  /// 0-based alphabet index of a real outcome.
  long bin_of(double x) const;

 private:
  BinningScheme(double alpha, double delta, long half_bins)
      : alpha_(alpha), delta_(delta), half_bins_(half_bins) {}

  double alpha_;
  double delta_;
  long half_bins_;
};

/// Discrete outcome distribution; p[i] is the mass of alphabet index
/// offset + i (offset is 0 for finite schemes, negative for the truncated
/// lattice of an unbounded scheme).
struct BinnedDistribution {
  std::vector<double> p;
  long offset = 0;

  double total() const;
};

/// Overlap constant of the two conjugated binned quadrature measurements,
/// c(delta) = delta^2/(2 pi) * S0(1, delta^2/4)^2. The prolate factor is the
/// leading term of its small-bandwidth expansion, the spherical Bessel
/// function j0(u) = sin(u)/u at u = delta^2/4; the first neglected term is
/// O(u^2) relative, far below every other tolerance for delta <= 0.5.
double overlap_c(double delta);

/// -log2 c(delta), bits per symbol.
double log2_inv_overlap(double delta);

/// Bin masses of a zero-mean Gaussian marginal with the given variance.
BinnedDistribution bin_probabilities(double variance,
                                     const BinningScheme& scheme);

/// Joint distribution of a zero-mean bivariate Gaussian over bin pairs,
/// stored as a banded row table (row = A index, columns = B indices).
struct JointBinnedDistribution {
  struct Row {
    long index = 0;      // alphabet index of this row
    long col_begin = 0;  // alphabet index of p[0]
    std::vector<double> p;
  };
  std::vector<Row> rows;

  double total() const;
  BinnedDistribution row_marginal() const;
  BinnedDistribution col_marginal() const;
};

/// Summary statistics of a binned Gaussian channel, computed in one pass.
struct DistanceMoments {
  double mean = 0.0;      // E |i - j|, bin units
  double variance = 0.0;  // Var |i - j|
};

struct BinnedChannelStats {
  double h_a = 0.0;        // H(X_A), bits
  double h_b = 0.0;        // H(X_B)
  double h_joint = 0.0;    // H(X_A X_B)
  double mutual_info = 0.0;
  double h_a_given_b = 0.0;
  double renyi_half_a = 0.0;  // max-entropy of the A marginal
  DistanceMoments distance;
  double total_mass = 0.0;
};

/// Banded builder (OpenMP-parallel over rows, deterministic accumulation).
/// `gamma2` is the 2x2 covariance of the measured pair (x_A, x_B).
JointBinnedDistribution joint_bin_distribution(const Eigen::Matrix2d& gamma2,
                                               const BinningScheme& scheme);

/// Serial reference builder: plain per-cell adaptive quadrature over the full
/// table. Only for small alphabets; kept as the oracle for the banded kernel.
JointBinnedDistribution joint_bin_distribution_reference(
    const Eigen::Matrix2d& gamma2, const BinningScheme& scheme);

/// Streaming statistics of the joint table without materializing it.
/// Marginal entropies come from the analytic marginals.
BinnedChannelStats binned_channel_stats(const Eigen::Matrix2d& gamma2,
                                        const BinningScheme& scheme);

double shannon_entropy(const BinnedDistribution& d);
double renyi_half_entropy(const BinnedDistribution& d);
double joint_shannon_entropy(const JointBinnedDistribution& joint);
/// H(X_A | X_B) from the joint table.
double conditional_shannon_entropy(const JointBinnedDistribution& joint);
double mutual_information(const JointBinnedDistribution& joint);
/// E|i - j| and Var|i - j| over the joint table.
DistanceMoments expected_distance(const JointBinnedDistribution& joint);

double normal_cdf(double x);
double normal_tail(double x);  // 1 - Phi(x)
double normal_quantile(double p);

}  // namespace cvqkd
