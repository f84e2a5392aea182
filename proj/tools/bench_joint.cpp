// Benchmark of the banded (OpenMP) joint-table builder against the serial
// adaptive-quadrature reference, plus the streaming statistics kernel.
#include <chrono>
#include <cstdio>

#include "cvqkd/discretization.hpp"
#include "cvqkd/gaussian.hpp"

using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int main() {
  const cvqkd::CovarianceMatrix state = cvqkd::apply_loss_excess(
      cvqkd::two_mode_squeezed_source(11.0, 16.0), 0.04, 0.01);
  Eigen::Matrix2d pair;
  pair << state(0, 0), state(0, 2), state(2, 0), state(2, 2);

  std::printf("%-10s %-8s %12s %12s %12s %14s\n", "alpha", "delta",
              "ref [s]", "banded [s]", "stats [s]", "max |diff|");
  struct Case {
    double alpha;
    double delta;
    bool run_reference;
  };
  const Case cases[] = {
      {12.0, 0.1, true},
      {20.0, 0.1, true},
      {20.0, 0.05, true},
      {52.0, 0.05, false},
      {52.0, 0.01, false},
  };
  for (const Case& c : cases) {
    const cvqkd::BinningScheme scheme =
        cvqkd::BinningScheme::bounded(c.alpha, c.delta);

    double t_ref = -1.0;
    cvqkd::JointBinnedDistribution ref;
    if (c.run_reference) {
      const auto start = Clock::now();
      ref = cvqkd::joint_bin_distribution_reference(pair, scheme);
      t_ref = seconds_since(start);
    }

    auto start = Clock::now();
    const cvqkd::JointBinnedDistribution banded =
        cvqkd::joint_bin_distribution(pair, scheme);
    const double t_banded = seconds_since(start);

    start = Clock::now();
    (void)cvqkd::binned_channel_stats(pair, scheme);
    const double t_stats = seconds_since(start);

    double max_diff = 0.0;
    if (c.run_reference) {
      for (std::size_t r = 0; r < banded.rows.size(); ++r) {
        const auto& row_b = banded.rows[r];
        const auto& row_r = ref.rows[r];
        const long lo = std::min(row_b.col_begin, row_r.col_begin);
        const long hi =
            std::max(row_b.col_begin + static_cast<long>(row_b.p.size()),
                     row_r.col_begin + static_cast<long>(row_r.p.size()));
        for (long col = lo; col < hi; ++col) {
          const long ib = col - row_b.col_begin;
          const long ir = col - row_r.col_begin;
          const double vb =
              (ib >= 0 && ib < static_cast<long>(row_b.p.size())) ? row_b.p[ib]
                                                                  : 0.0;
          const double vr =
              (ir >= 0 && ir < static_cast<long>(row_r.p.size())) ? row_r.p[ir]
                                                                  : 0.0;
          max_diff = std::max(max_diff, std::abs(vb - vr));
        }
      }
    }

    if (c.run_reference) {
      std::printf("%-10.3g %-8.3g %12.3f %12.3f %12.3f %14.3e\n", c.alpha,
                  c.delta, t_ref, t_banded, t_stats, max_diff);
    } else {
      std::printf("%-10.3g %-8.3g %12s %12.3f %12.3f %14s\n", c.alpha,
                  c.delta, "-", t_banded, t_stats, "-");
    }
  }
  return 0;
}
