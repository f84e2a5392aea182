#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace cvqkd {

// Unit convention used everywhere in this project: hbar = 1, so the vacuum
// state has quadrature variance 1/2 and symplectic eigenvalues are >= 1/2.
// Quadrature ordering is (q1, p1, q2, p2, ...). Entropies are in bits.
inline constexpr double kVacuumVariance = 0.5;

enum class Quadrature { q, p };

struct PhysicalityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Covariance matrix of an m-mode Gaussian state (zero mean assumed).
/// Symmetrized on construction; construction fails if the matrix is not
/// positive definite or has a symplectic eigenvalue below 1/2 - 1e-9.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd entries);

  static CovarianceMatrix vacuum(int modes);

  int modes() const { return static_cast<int>(mat_.rows()) / 2; }
  const Eigen::MatrixXd& matrix() const { return mat_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return mat_(i, j); }

  /// Reduced state on the given modes (0-based, order preserved).
  CovarianceMatrix marginal(const std::vector<int>& kept_modes) const;

 private:
  Eigen::MatrixXd mat_;
};

/// Standard symplectic form Omega = diag([[0,1],[-1,0]], ...) for m modes.
Eigen::MatrixXd symplectic_form(int modes);

/// Symplectic eigenvalues of a symmetric matrix (moduli of the eigenvalues of
/// i*Omega*Gamma, deduplicated), descending. Does not validate physicality.
std::vector<double> symplectic_eigenvalues_of(const Eigen::MatrixXd& gamma);

std::vector<double> symplectic_eigenvalues(const CovarianceMatrix& gamma);

/// g(nu) = (nu+1/2) log2(nu+1/2) - (nu-1/2) log2(nu-1/2), with g(1/2) = 0.
double entropy_g(double nu);

/// Von Neumann entropy of the Gaussian state, in bits.
double gaussian_entropy(const CovarianceMatrix& gamma);

/// Source state: two squeezed vacua mixed on a balanced beam splitter.
/// q_A,q_B correlated, p_A,p_B anticorrelated.
CovarianceMatrix two_mode_squeezed_source(double squeezing_db,
                                          double antisqueezing_db);

/// Gamma -> (1 - mu_loss) Gamma + (mu_loss + mu_en) Gamma_vac, applied
/// symmetrically to all modes.
CovarianceMatrix apply_loss_excess(const CovarianceMatrix& gamma,
                                   double mu_loss, double mu_en);

/// Gaussian purification: returns a pure state on 2m modes whose first m
/// modes reproduce the input. Built from the Williamson decomposition with a
/// two-mode-squeezer partner per thermal mode.
CovarianceMatrix gaussian_purification(const CovarianceMatrix& gamma_ab);

/// Post-measurement covariance after a homodyne measurement of one quadrature
/// of `measured_mode`; the measured mode is removed. The result does not
/// depend on the outcome.
CovarianceMatrix condition_on_homodyne(const CovarianceMatrix& gamma,
                                       int measured_mode, Quadrature quad);

}  // namespace cvqkd
