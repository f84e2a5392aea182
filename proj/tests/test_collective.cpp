#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvqkd/collective.hpp"
#include "cvqkd/sim.hpp"

using namespace cvqkd;

namespace {

BinnedChannelStats stats_for(const CovarianceMatrix& g,
                             const BinningScheme& scheme) {
  Eigen::Matrix2d block;
  block << g(0, 0), g(0, 2), g(2, 0), g(2, 2);
  return binned_channel_stats(block, scheme);
}

CovarianceMatrix lossy_tmsv(double loss) {
  return apply_loss_excess(two_mode_squeezed_source(11.0, 16.0), loss, 0.01);
}

// Second moment of the environment's q quadrature conditioned on measuring
// q_A = 0, by direct numerical integration of the joint Gaussian density of
// (q_E, q_A) restricted to q_A = 0. Simpson rule over +-20 sigma.
double conditional_q_variance_by_integration(double v_e, double v_a,
                                             double cov) {
  const double det = v_e * v_a - cov * cov;
  auto density = [&](double x) {
    // joint density at (q_E = x, q_A = 0), unnormalized
    return std::exp(-0.5 * x * x * v_a / det);
  };
  const double half = 20.0 * std::sqrt(v_e);
  const int steps = 20000;
  const double h = 2.0 * half / steps;
  double mass = 0.0;
  double second = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = -half + i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    mass += w * density(x);
    second += w * x * x * density(x);
  }
  return second / mass;
}

}  // namespace

TEST_CASE("AEP correction") {
  const double delta = aep_delta(5e-7, 10.0);
  CHECK(delta > 0.0);
  CHECK(aep_delta(5e-7, 12.0) > delta);   // increasing in H_max
  CHECK(aep_delta(1e-3, 10.0) < delta);   // decreasing in eps
  SUBCASE("closed-form re-evaluation") {
    const double eps = 5e-7;
    const double hmax = 10.0;
    const double expected = 4.0 *
                            std::log2(std::pow(2.0, 0.5 * hmax + 1.0) + 1.0) *
                            std::sqrt(std::log2(2.0 / (eps * eps)));
    CHECK(aep_delta(eps, hmax) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("validity threshold") {
    const double eps = 1e-6;
    CHECK(aep_min_rounds(eps) ==
          doctest::Approx(1.6 * std::log2(2.0 / (eps * eps))).epsilon(1e-12));
  }
}

TEST_CASE("conditional entropy bound") {
  const BinningScheme scheme = BinningScheme::unbounded(0.1);
  SUBCASE("pure state decouples the eavesdropper") {
    const CovarianceMatrix pure = two_mode_squeezed_source(11.0, 11.0);
    const double bound = conditional_entropy_bound(pure, scheme);
    const double h_xa =
        shannon_entropy(bin_probabilities(pure(0, 0), scheme));
    CHECK(bound == doctest::Approx(h_xa).epsilon(1e-6));
  }
  SUBCASE("never exceeds H(X_A)") {
    for (double loss : {0.0, 0.1, 0.24}) {
      const CovarianceMatrix g = lossy_tmsv(loss);
      const double bound = conditional_entropy_bound(g, scheme);
      const double h_xa = shannon_entropy(bin_probabilities(g(0, 0), scheme));
      CHECK(bound >= 0.0);
      CHECK(bound <= h_xa + 1e-9);
    }
  }
  SUBCASE("environment conditioning matches direct integration") {
    // Purify a single thermal mode and condition the 1-mode environment on
    // q_A = 0; check the Schur complement against brute-force integration.
    const double v = 1.7;
    Eigen::MatrixXd m = v * Eigen::MatrixXd::Identity(2, 2);
    const CovarianceMatrix pure = gaussian_purification(CovarianceMatrix(m));
    REQUIRE(pure.modes() == 2);
    const CovarianceMatrix env_cond =
        condition_on_homodyne(pure, 0, Quadrature::q);
    const double oracle = conditional_q_variance_by_integration(
        pure(2, 2), pure(0, 0), pure(0, 2));
    CHECK(env_cond(0, 0) == doctest::Approx(oracle).epsilon(1e-6));
    // the conditioned environment of a purified single mode is pure
    const auto nus = symplectic_eigenvalues(env_cond);
    CHECK(nus[0] == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("confidence box") {
  const CovarianceMatrix g = lossy_tmsv(0.06);
  const CovarianceParams center{g(0, 0), g(2, 2), g(0, 2)};
  SUBCASE("widths shrink with samples") {
    const ConfidenceBox small = build_confidence_box(center, 10000, 1e-6);
    const ConfidenceBox large = build_confidence_box(center, 100000000, 1e-6);
    CHECK(small.half_widths.v_a > large.half_widths.v_a);
    CHECK(small.half_widths.z > large.half_widths.z);
    CHECK(large.half_widths.v_a > 0.0);
    CHECK(!small.out_of_validated_range);
  }
  SUBCASE("eps_pe = 1 collapses the box") {
    const ConfidenceBox box = build_confidence_box(center, 10000, 1.0);
    CHECK(box.half_widths.v_a == doctest::Approx(0.0));
    CHECK(box.half_widths.v_b == doctest::Approx(0.0));
    CHECK(box.half_widths.z == doctest::Approx(0.0));
  }
  SUBCASE("tiny samples flagged") {
    CHECK(build_confidence_box(center, 50, 1e-6).out_of_validated_range);
    CHECK_THROWS(build_confidence_box(center, 1, 1e-6));
  }
  SUBCASE("corner enumeration and physicality") {
    const ConfidenceBox box = build_confidence_box(center, 1000, 1e-6);
    const auto points = box.corners_and_center();
    REQUIRE(points.size() == 9);
    for (const auto& p : points) {
      CHECK(symplectic_eigenvalues(p.to_matrix()).back() >= 0.5 - 1e-9);
    }
  }
  SUBCASE("corner minimum dominates the center and the grid agrees") {
    const BinningScheme scheme = BinningScheme::unbounded(0.1);
    const ConfidenceBox box = build_confidence_box(center, 1000000, 1e-6);
    const double corners = min_conditional_entropy_over_box(box, scheme);
    const double cntr =
        conditional_entropy_bound(box.center.to_matrix(), scheme);
    CHECK(corners <= cntr + 1e-12);
    const double grid = min_conditional_entropy_over_box(box, scheme, 3);
    CHECK(grid <= corners + 1e-12);
    CHECK(corners - grid <= 1e-3);  // smooth dependence over a small box
  }
}

TEST_CASE("collective key length") {
  const BinningScheme scheme = BinningScheme::unbounded(0.01);
  SecurityBudget budget;
  SUBCASE("positive at 24 percent loss") {
    const CovarianceMatrix g = lossy_tmsv(0.24);
    const CovarianceParams model{g(0, 0), g(2, 2), g(0, 2)};
    const KeyRateResult r = key_length_collective(
        1000000000, 100000000, scheme, budget, model, stats_for(g, scheme),
        0.95);
    CHECK(r.ell > 0);
    CHECK(r.secrecy_eps == doctest::Approx(2e-6));  // eps_s + eps_pe
    // sqrt(n) penalty in the breakdown matches aep_delta exactly
    const double n = 9e8;
    const auto& b = r.breakdown;
    const double delta_direct =
        aep_delta(budget.eps_smooth(), stats_for(g, scheme).renyi_half_a);
    CHECK(b.aep_bits == doctest::Approx(std::sqrt(n) * delta_direct)
                            .epsilon(1e-12));
    CHECK(r.ell == static_cast<long long>(std::floor(b.raw_sum)));
  }
  SUBCASE("AEP validity enforced") {
    const CovarianceMatrix g = lossy_tmsv(0.0);
    const CovarianceParams model{g(0, 0), g(2, 2), g(0, 2)};
    // eps_smooth = 5e-7 puts the validity threshold near n = 69 rounds
    CHECK(aep_min_rounds(budget.eps_smooth()) > 60.0);
    CHECK_THROWS_WITH(key_length_collective(60, 10, scheme, budget, model,
                                            stats_for(g, scheme), 0.95),
                      doctest::Contains("AEP validity"));
  }
  SUBCASE("monotone in total rounds") {
    const CovarianceMatrix g = lossy_tmsv(0.1);
    const CovarianceParams model{g(0, 0), g(2, 2), g(0, 2)};
    const BinnedChannelStats stats = stats_for(g, scheme);
    long long prev = -1;
    for (long long total : {10000000LL, 100000000LL, 1000000000LL}) {
      const KeyRateResult r = key_length_collective(
          total, total / 10, scheme, budget, model, stats, 0.95);
      CHECK(r.rate >= (prev < 0 ? 0.0 : 0.0));
      CHECK(r.ell > prev);
      prev = r.ell;
    }
  }
}

TEST_CASE("Devetak-Winter rate") {
  const BinningScheme scheme = BinningScheme::unbounded(0.01);
  SUBCASE("uncorrelated state gives no positive rate") {
    Eigen::MatrixXd m = 1.3 * Eigen::MatrixXd::Identity(4, 4);
    const CovarianceMatrix g(m);
    CHECK(devetak_winter_rate(g, scheme, stats_for(g, scheme)) <= 1e-9);
  }
  SUBCASE("dominates the finite collective rate and decreases with loss") {
    SecurityBudget budget;
    double prev = 1e300;
    for (double loss : {0.0, 0.1, 0.2, 0.3}) {
      const CovarianceMatrix g = lossy_tmsv(loss);
      const BinnedChannelStats stats = stats_for(g, scheme);
      const double dw = devetak_winter_rate(g, scheme, stats);
      CHECK(dw < prev);
      prev = dw;
      const CovarianceParams model{g(0, 0), g(2, 2), g(0, 2)};
      const KeyRateResult r = key_length_collective(
          1000000000, 100000000, scheme, budget, model, stats, 0.95);
      const double finite_rate = static_cast<double>(r.ell) / 9e8;
      CHECK(dw >= finite_rate);
    }
  }
}
