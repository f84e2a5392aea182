#include "cvqkd/discretization.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "cvqkd/gaussian.hpp"

namespace cvqkd {

namespace {

// Lattice truncation and quadrature policy for the joint tables.
constexpr double kTruncationSigmas = 12.0;   // end-bin folding beyond this
constexpr double kHardCut = 13.5;            // absolute integration cut
constexpr double kBandSigmas = 8.5;          // conditional band half-width
constexpr double kPanelWidthSigmas = 0.25;   // Gauss-Legendre panel width
constexpr double kRowMassSkip = 1e-18;

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

double normal_pdf(double x, double sigma) {
  const double z = x / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

struct GaussPair {
  double sx = 0.0;     // std of x
  double sy = 0.0;     // std of y
  double slope = 0.0;  // E[y|x] = slope * x
  double s_cond = 0.0; // std of y | x
};

GaussPair make_pair_params(const Eigen::Matrix2d& gamma2) {
  const double vx = gamma2(0, 0);
  const double vy = gamma2(1, 1);
  const double c = 0.5 * (gamma2(0, 1) + gamma2(1, 0));
  if (!(vx > 0.0) || !(vy > 0.0)) {
    throw std::invalid_argument("joint distribution: variances must be > 0");
  }
  const double rho = c / std::sqrt(vx * vy);
  if (std::abs(rho) > 1.0 - 1e-9) {
    throw std::invalid_argument(
        "joint distribution: correlation too close to +-1");
  }
  GaussPair p;
  p.sx = std::sqrt(vx);
  p.sy = std::sqrt(vy);
  p.slope = c / vx;
  p.s_cond = std::sqrt(vy * (1.0 - rho * rho));
  return p;
}

// Half-range of the computational lattice (bins of width delta indexed so
// that bin t covers (t d, (t+1) d]); the lattice spans [-L, L-1].
long lattice_half_range(const GaussPair& p, const BinningScheme& scheme) {
  const double sigma = std::max(p.sx, p.sy);
  long l = static_cast<long>(
      std::ceil(kTruncationSigmas * sigma / scheme.delta()));
  l = std::max<long>(l, 1);
  if (scheme.finite()) {
    l = std::max(l, scheme.half_bins());
  }
  return l;
}

struct LatticeRow {
  long t0 = 0;  // lattice column index of p[0]
  std::vector<double> p;
};

// Mass of the bivariate Gaussian over lattice row k: x in (k d, (k+1) d]
// (half-infinite at the lattice ends), columns resolved by exact conditional
// CDF differences, the x integral by fixed Gauss-Legendre panels of width
// <= 0.25 sigma.
LatticeRow compute_lattice_row(const GaussPair& gp, double delta, long l,
                               long k) {
  LatticeRow row;
  double xa = (k == -l) ? -kHardCut * gp.sx : k * delta;
  double xb = (k == l - 1) ? kHardCut * gp.sx : (k + 1) * delta;
  xa = std::max(xa, -kHardCut * gp.sx);
  xb = std::min(xb, kHardCut * gp.sx);
  if (xa >= xb) {
    return row;
  }

  const double spread = kBandSigmas * gp.s_cond + delta;
  const double mu_a = gp.slope * xa;
  const double mu_b = gp.slope * xb;
  const double lo = std::min(mu_a, mu_b) - spread;
  const double hi = std::max(mu_a, mu_b) + spread;
  long t_lo = std::max<long>(static_cast<long>(std::floor(lo / delta)), -l);
  long t_hi = std::min<long>(static_cast<long>(std::floor(hi / delta)), l - 1);
  if (t_hi < t_lo) {
    t_lo = t_hi = std::clamp<long>(
        static_cast<long>(std::floor(0.5 * (lo + hi) / delta)), -l, l - 1);
  }
  row.t0 = t_lo;
  row.p.assign(static_cast<size_t>(t_hi - t_lo + 1), 0.0);

  const int panels = std::max(
      1, static_cast<int>(std::ceil((xb - xa) / (kPanelWidthSigmas * gp.sx))));
  const double h = (xb - xa) / panels;
  double mu[5];
  double wphi[5];
  std::vector<double> prev(row.p.size() + 1);
  for (int panel = 0; panel < panels; ++panel) {
    const double mid = xa + (panel + 0.5) * h;
    for (int q = 0; q < 5; ++q) {
      const double x = mid + 0.5 * h * kGlNode[q];
      mu[q] = gp.slope * x;
      wphi[q] = 0.5 * h * kGlWeight[q] * normal_pdf(x, gp.sx);
    }
    for (size_t i = 0; i <= row.p.size(); ++i) {
      const long t = t_lo + static_cast<long>(i);
      double acc = 0.0;
      if (t == -l && i == 0) {
        // lower edge of the first lattice bin is -infinity
      } else if (t == l && i == row.p.size()) {
        for (int q = 0; q < 5; ++q) acc += wphi[q];
      } else {
        for (int q = 0; q < 5; ++q) {
          acc += wphi[q] * normal_cdf((t * delta - mu[q]) / gp.s_cond);
        }
      }
      if (i > 0) {
        row.p[i - 1] += acc - prev[i - 1];
      }
      prev[i] = acc;
    }
  }
  return row;
}

double row_mass_analytic(const GaussPair& gp, double delta, long l, long k) {
  const double xa = (k == -l) ? -std::numeric_limits<double>::infinity()
                              : k * delta;
  const double xb = (k == l - 1) ? std::numeric_limits<double>::infinity()
                                 : (k + 1) * delta;
  const double lo = std::isfinite(xa) ? normal_cdf(xa / gp.sx) : 0.0;
  const double hi = std::isfinite(xb) ? normal_cdf(xb / gp.sx) : 1.0;
  return hi - lo;
}

// Adaptive Simpson, used by the serial reference builder.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double cell_probability_reference(const GaussPair& gp, double xa, double xb,
                                  double ya, double yb) {
  const auto f = [&](double x) {
    const double mu = gp.slope * x;
    const double hi = std::isfinite(yb)
                          ? normal_cdf((yb - mu) / gp.s_cond)
                          : 1.0;
    const double lo = std::isfinite(ya)
                          ? normal_cdf((ya - mu) / gp.s_cond)
                          : 0.0;
    return normal_pdf(x, gp.sx) * (hi - lo);
  };
  const double a = std::isfinite(xa) ? xa : -kHardCut * gp.sx;
  const double b = std::isfinite(xb) ? xb : kHardCut * gp.sx;
  if (a >= b) {
    return 0.0;
  }
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adaptive_simpson(f, a, b, fa, fm, fb, 1e-12, 24);
}

}  // namespace

BinningScheme BinningScheme::bounded(double alpha, double delta) {
  if (!(delta > 0.0) || !(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("binning: need alpha > 0 and delta > 0");
  }
  const double ratio = alpha / delta;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) ||
      rounded < 1.0) {
    throw std::invalid_argument("binning: 2*alpha/delta must be an integer");
  }
  return BinningScheme(alpha, delta, static_cast<long>(rounded));
}

BinningScheme BinningScheme::unbounded(double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("binning: need delta > 0");
  }
  return BinningScheme(std::numeric_limits<double>::infinity(), delta, 0);
}

long BinningScheme::alphabet_size() const {
  if (!finite()) {
    throw std::logic_error("alphabet_size: unbounded scheme");
  }
  return 2 * half_bins_;
}

long BinningScheme::fold_lattice_index(long k) const {
  if (!finite()) {
    return k;
  }
  return std::clamp<long>(k + half_bins_, 0, 2 * half_bins_ - 1);
}

long BinningScheme::bin_of(double x) const {
  const long k = static_cast<long>(std::floor(x / delta_));
  return fold_lattice_index(k);
}

double BinnedDistribution::total() const {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

double overlap_c(double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("overlap_c: delta must be > 0");
  }
  const double u = 0.25 * delta * delta;
  const double prolate = (u < 1e-8) ? 1.0 - u * u / 6.0 : std::sin(u) / u;
  const double c =
      delta * delta / (2.0 * std::numbers::pi) * prolate * prolate;
  if (c >= 1.0) {
    throw std::invalid_argument(
        "overlap_c: bin width makes the uncertainty relation trivial");
  }
  return c;
}

double log2_inv_overlap(double delta) { return -std::log2(overlap_c(delta)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  boost::math::normal_distribution<double> dist;
  return boost::math::quantile(dist, p);
}

BinnedDistribution bin_probabilities(double variance,
                                     const BinningScheme& scheme) {
  if (!(variance > 0.0)) {
    throw std::invalid_argument("bin_probabilities: variance must be > 0");
  }
  const double sigma = std::sqrt(variance);
  const double delta = scheme.delta();
  BinnedDistribution out;
  long lo;
  long hi;
  if (scheme.finite()) {
    lo = -scheme.half_bins();
    hi = scheme.half_bins() - 1;
    out.offset = 0;
  } else {
    const long l = std::max<long>(
        1, static_cast<long>(std::ceil(kTruncationSigmas * sigma / delta)));
    lo = -l;
    hi = l - 1;
    out.offset = -l;
  }
  out.p.resize(static_cast<size_t>(hi - lo + 1));
  for (long k = lo; k <= hi; ++k) {
    // Tail-stable: both bounds evaluated on the same side of the bulk.
    double mass;
    if (k >= 0) {
      const double upper = (k == hi) ? 0.0 : normal_tail((k + 1) * delta / sigma);
      mass = normal_tail(k * delta / sigma) - upper;
    } else {
      const double lower = (k == lo) ? 0.0 : normal_cdf(k * delta / sigma);
      mass = normal_cdf((k + 1) * delta / sigma) - lower;
    }
    out.p[static_cast<size_t>(k - lo)] = std::max(mass, 0.0);
  }
  return out;
}

double JointBinnedDistribution::total() const {
  double s = 0.0;
  for (const auto& row : rows) {
    for (double v : row.p) s += v;
  }
  return s;
}

BinnedDistribution JointBinnedDistribution::row_marginal() const {
  BinnedDistribution out;
  if (rows.empty()) return out;
  long lo = rows.front().index;
  long hi = rows.back().index;
  for (const auto& r : rows) {
    lo = std::min(lo, r.index);
    hi = std::max(hi, r.index);
  }
  out.offset = lo;
  out.p.assign(static_cast<size_t>(hi - lo + 1), 0.0);
  for (const auto& r : rows) {
    double s = 0.0;
    for (double v : r.p) s += v;
    out.p[static_cast<size_t>(r.index - lo)] += s;
  }
  return out;
}

BinnedDistribution JointBinnedDistribution::col_marginal() const {
  BinnedDistribution out;
  if (rows.empty()) return out;
  long lo = rows.front().col_begin;
  long hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, r.col_begin);
    hi = std::max(hi, r.col_begin + static_cast<long>(r.p.size()) - 1);
  }
  out.offset = lo;
  out.p.assign(static_cast<size_t>(hi - lo + 1), 0.0);
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.p.size(); ++i) {
      out.p[static_cast<size_t>(r.col_begin - lo) + i] += r.p[i];
    }
  }
  return out;
}

JointBinnedDistribution joint_bin_distribution(const Eigen::Matrix2d& gamma2,
                                               const BinningScheme& scheme) {
  const GaussPair gp = make_pair_params(gamma2);
  const double delta = scheme.delta();
  const long l = lattice_half_range(gp, scheme);
  const long band_cols = static_cast<long>(
      std::ceil(2.0 * (kBandSigmas * gp.s_cond + delta) / delta)) + 2;
  const long active_rows = std::min<long>(
      2 * l, 2 * static_cast<long>(
                 std::ceil(kTruncationSigmas * gp.sx / delta)) + 2);
  if (active_rows * band_cols > 40'000'000L) {
    throw std::invalid_argument(
        "joint_bin_distribution: table too large to materialize; "
        "use binned_channel_stats");
  }

  std::vector<LatticeRow> lattice(static_cast<size_t>(2 * l));
  std::vector<long> ks(static_cast<size_t>(2 * l));
  for (long k = -l; k < l; ++k) ks[static_cast<size_t>(k + l)] = k;
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < 2 * l; ++i) {
    const long k = ks[static_cast<size_t>(i)];
    if (row_mass_analytic(gp, delta, l, k) < kRowMassSkip) {
      continue;
    }
    lattice[static_cast<size_t>(i)] = compute_lattice_row(gp, delta, l, k);
  }

  JointBinnedDistribution out;
  if (!scheme.finite()) {
    for (long i = 0; i < 2 * l; ++i) {
      auto& lr = lattice[static_cast<size_t>(i)];
      if (lr.p.empty()) continue;
      out.rows.push_back({ks[static_cast<size_t>(i)], lr.t0, std::move(lr.p)});
    }
    return out;
  }

  // Fold lattice rows/columns into the finite alphabet.
  const long m_size = scheme.alphabet_size();
  std::vector<std::vector<double>> folded(static_cast<size_t>(m_size));
  std::vector<long> begins(static_cast<size_t>(m_size), 0);
  for (long i = 0; i < 2 * l; ++i) {
    const auto& lr = lattice[static_cast<size_t>(i)];
    if (lr.p.empty()) continue;
    const long row_idx = scheme.fold_lattice_index(ks[static_cast<size_t>(i)]);
    const long jb = scheme.fold_lattice_index(lr.t0);
    const long je =
        scheme.fold_lattice_index(lr.t0 + static_cast<long>(lr.p.size()) - 1);
    auto& dst = folded[static_cast<size_t>(row_idx)];
    if (dst.empty()) {
      begins[static_cast<size_t>(row_idx)] = jb;
      dst.assign(static_cast<size_t>(je - jb + 1), 0.0);
    } else {
      const long cur_b = begins[static_cast<size_t>(row_idx)];
      const long cur_e = cur_b + static_cast<long>(dst.size()) - 1;
      const long nb = std::min(cur_b, jb);
      const long ne = std::max(cur_e, je);
      if (nb != cur_b || ne != cur_e) {
        std::vector<double> grown(static_cast<size_t>(ne - nb + 1), 0.0);
        std::copy(dst.begin(), dst.end(),
                  grown.begin() + static_cast<size_t>(cur_b - nb));
        dst = std::move(grown);
        begins[static_cast<size_t>(row_idx)] = nb;
      }
    }
    const long base = begins[static_cast<size_t>(row_idx)];
    for (size_t c = 0; c < lr.p.size(); ++c) {
      const long j = scheme.fold_lattice_index(lr.t0 + static_cast<long>(c));
      dst[static_cast<size_t>(j - base)] += lr.p[c];
    }
  }
  for (long i = 0; i < m_size; ++i) {
    if (folded[static_cast<size_t>(i)].empty()) continue;
    out.rows.push_back({i, begins[static_cast<size_t>(i)],
                        std::move(folded[static_cast<size_t>(i)])});
  }
  return out;
}

JointBinnedDistribution joint_bin_distribution_reference(
    const Eigen::Matrix2d& gamma2, const BinningScheme& scheme) {
  const GaussPair gp = make_pair_params(gamma2);
  const double delta = scheme.delta();
  long lo;
  long hi;
  if (scheme.finite()) {
    if (scheme.alphabet_size() > 1200) {
      throw std::invalid_argument(
          "reference joint table: alphabet too large for the dense builder");
    }
    lo = -scheme.half_bins();
    hi = scheme.half_bins() - 1;
  } else {
    const long l = lattice_half_range(gp, scheme);
    if (l > 600) {
      throw std::invalid_argument(
          "reference joint table: lattice too large for the dense builder");
    }
    lo = -l;
    hi = l - 1;
  }
  const double inf = std::numeric_limits<double>::infinity();
  JointBinnedDistribution out;
  for (long k = lo; k <= hi; ++k) {
    const double xa = (k == lo) ? -inf : k * delta;
    const double xb = (k == hi) ? inf : (k + 1) * delta;
    JointBinnedDistribution::Row row;
    row.index = scheme.finite() ? k + scheme.half_bins() : k;
    row.col_begin = scheme.finite() ? 0 : lo;
    row.p.resize(static_cast<size_t>(hi - lo + 1));
    for (long t = lo; t <= hi; ++t) {
      const double ya = (t == lo) ? -inf : t * delta;
      const double yb = (t == hi) ? inf : (t + 1) * delta;
      row.p[static_cast<size_t>(t - lo)] =
          cell_probability_reference(gp, xa, xb, ya, yb);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

BinnedChannelStats binned_channel_stats(const Eigen::Matrix2d& gamma2,
                                        const BinningScheme& scheme) {
  const GaussPair gp = make_pair_params(gamma2);
  const double delta = scheme.delta();
  const long l = lattice_half_range(gp, scheme);

  // The Gaussian is even, the lattice is symmetric about 0 and end-bin
  // folding respects the mirror k <-> -1-k, so rows k >= 0 carry exactly
  // half of every accumulated quantity.
  struct RowPartial {
    double mass = 0.0;
    double neg_plog = 0.0;   // -sum p log2 p over (col-folded) cells
    double dist1 = 0.0;      // sum p |i-j|
    double dist2 = 0.0;      // sum p (i-j)^2
  };
  std::vector<RowPartial> partials(static_cast<size_t>(l));

#pragma omp parallel for schedule(dynamic, 64)
  for (long k = 0; k < l; ++k) {
    if (row_mass_analytic(gp, delta, l, k) < kRowMassSkip) {
      continue;
    }
    const LatticeRow lr = compute_lattice_row(gp, delta, l, k);
    if (lr.p.empty()) continue;
    const long i = scheme.fold_lattice_index(k);
    RowPartial rp;
    const auto add_cell = [&](long j, double p) {
      if (p <= 0.0) return;
      rp.mass += p;
      rp.neg_plog -= xlog2x(p);
      const double d = static_cast<double>(std::labs(i - j));
      rp.dist1 += p * d;
      rp.dist2 += p * d * d;
    };
    if (!scheme.finite()) {
      for (size_t c = 0; c < lr.p.size(); ++c) {
        add_cell(lr.t0 + static_cast<long>(c), lr.p[c]);
      }
    } else {
      // Column folding is exact within a row; row folding merges whole rows
      // beyond +-alpha, whose mass is negligible for alpha several sigma out.
      const long a = scheme.half_bins();
      double left_fold = 0.0;
      double right_fold = 0.0;
      for (size_t c = 0; c < lr.p.size(); ++c) {
        const long t = lr.t0 + static_cast<long>(c);
        if (t <= -a) {
          left_fold += lr.p[c];
        } else if (t >= a - 1) {
          right_fold += lr.p[c];
        } else {
          add_cell(t + a, lr.p[c]);
        }
      }
      add_cell(0, left_fold);
      add_cell(2 * a - 1, right_fold);
    }
    partials[static_cast<size_t>(k)] = rp;
  }

  BinnedChannelStats stats;
  double mass = 0.0;
  double neg_plog = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  for (const auto& rp : partials) {
    mass += rp.mass;
    neg_plog += rp.neg_plog;
    d1 += rp.dist1;
    d2 += rp.dist2;
  }
  stats.total_mass = 2.0 * mass;
  stats.h_joint = 2.0 * neg_plog;
  stats.distance.mean = 2.0 * d1;
  stats.distance.variance =
      2.0 * d2 - stats.distance.mean * stats.distance.mean;

  const BinnedDistribution pa = bin_probabilities(gamma2(0, 0), scheme);
  const BinnedDistribution pb = bin_probabilities(gamma2(1, 1), scheme);
  stats.h_a = shannon_entropy(pa);
  stats.h_b = shannon_entropy(pb);
  stats.renyi_half_a = renyi_half_entropy(pa);
  stats.mutual_info = stats.h_a + stats.h_b - stats.h_joint;
  stats.h_a_given_b = stats.h_joint - stats.h_b;
  return stats;
}

double shannon_entropy(const BinnedDistribution& d) {
  double h = 0.0;
  for (double p : d.p) h -= xlog2x(p);
  return h;
}

double renyi_half_entropy(const BinnedDistribution& d) {
  double s = 0.0;
  for (double p : d.p) {
    if (p > 0.0) s += std::sqrt(p);
  }
  return 2.0 * std::log2(s);
}

double joint_shannon_entropy(const JointBinnedDistribution& joint) {
  double h = 0.0;
  for (const auto& r : joint.rows) {
    for (double p : r.p) h -= xlog2x(p);
  }
  return h;
}

double conditional_shannon_entropy(const JointBinnedDistribution& joint) {
  return joint_shannon_entropy(joint) - shannon_entropy(joint.col_marginal());
}

double mutual_information(const JointBinnedDistribution& joint) {
  return shannon_entropy(joint.row_marginal()) +
         shannon_entropy(joint.col_marginal()) - joint_shannon_entropy(joint);
}

DistanceMoments expected_distance(const JointBinnedDistribution& joint) {
  double d1 = 0.0;
  double d2 = 0.0;
  for (const auto& r : joint.rows) {
    for (size_t c = 0; c < r.p.size(); ++c) {
      const double d =
          static_cast<double>(std::labs(r.index - (r.col_begin + static_cast<long>(c))));
      d1 += r.p[c] * d;
      d2 += r.p[c] * d * d;
    }
  }
  return {d1, d2 - d1 * d1};
}

}  // namespace cvqkd
