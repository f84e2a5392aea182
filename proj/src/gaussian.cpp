#include "cvqkd/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cvqkd {

namespace {

constexpr double kPhysicalTol = 1e-9;

}  // namespace

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd entries) {
  if (entries.rows() != entries.cols() || entries.rows() < 2 ||
      entries.rows() % 2 != 0) {
    throw std::invalid_argument("covariance matrix must be 2m x 2m");
  }
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  if (asym > 1e-6 * scale) {
    throw std::invalid_argument("covariance matrix is not symmetric");
  }
  mat_ = 0.5 * (entries + entries.transpose());
  // Allow a rounding-level negative eigenvalue for states sitting on the
  // physicality boundary; the symplectic check below is the real gate.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      mat_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success ||
      es.eigenvalues().minCoeff() < -kPhysicalTol * scale) {
    throw PhysicalityError("covariance matrix is not positive definite");
  }
  const auto nus = symplectic_eigenvalues_of(mat_);
  const double nu_min = nus.back();
  if (nu_min < kVacuumVariance - kPhysicalTol) {
    std::ostringstream msg;
    msg << "unphysical covariance matrix: symplectic eigenvalue " << nu_min
        << " < 1/2";
    throw PhysicalityError(msg.str());
  }
}

CovarianceMatrix CovarianceMatrix::vacuum(int modes) {
  return CovarianceMatrix(kVacuumVariance *
                          Eigen::MatrixXd::Identity(2 * modes, 2 * modes));
}

CovarianceMatrix CovarianceMatrix::marginal(
    const std::vector<int>& kept_modes) const {
  std::vector<int> idx;
  idx.reserve(2 * kept_modes.size());
  for (int m : kept_modes) {
    if (m < 0 || m >= modes()) {
      throw std::invalid_argument("marginal: mode index out of range");
    }
    idx.push_back(2 * m);
    idx.push_back(2 * m + 1);
  }
  Eigen::MatrixXd sub(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    for (size_t j = 0; j < idx.size(); ++j) {
      sub(i, j) = mat_(idx[i], idx[j]);
    }
  }
  return CovarianceMatrix(std::move(sub));
}

Eigen::MatrixXd symplectic_form(int modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
  for (int m = 0; m < modes; ++m) {
    omega(2 * m, 2 * m + 1) = 1.0;
    omega(2 * m + 1, 2 * m) = -1.0;
  }
  return omega;
}

std::vector<double> symplectic_eigenvalues_of(const Eigen::MatrixXd& gamma) {
  const int m = static_cast<int>(gamma.rows()) / 2;
  const Eigen::MatrixXd a = symplectic_form(m) * gamma;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalue computation for Omega*Gamma failed");
  }
  std::vector<double> moduli(2 * m);
  for (int i = 0; i < 2 * m; ++i) {
    moduli[i] = std::abs(solver.eigenvalues()(i));
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  // Eigenvalues come in +-i*nu pairs; keep one of each.
  std::vector<double> nus(m);
  for (int k = 0; k < m; ++k) {
    nus[k] = 0.5 * (moduli[2 * k] + moduli[2 * k + 1]);
  }
  return nus;
}

std::vector<double> symplectic_eigenvalues(const CovarianceMatrix& gamma) {
  return symplectic_eigenvalues_of(gamma.matrix());
}

double entropy_g(double nu) {
  const double a = nu + 0.5;
  const double b = nu - 0.5;
  double out = a * std::log2(a);
  if (b > 1e-300) {
    out -= b * std::log2(b);
  }
  return out;
}

double gaussian_entropy(const CovarianceMatrix& gamma) {
  double bits = 0.0;
  for (double nu : symplectic_eigenvalues(gamma)) {
    if (nu > 0.5) {
      bits += entropy_g(nu);
    }
  }
  return bits;
}

CovarianceMatrix two_mode_squeezed_source(double squeezing_db,
                                          double antisqueezing_db) {
  if (squeezing_db < 0.0) {
    throw std::invalid_argument("squeezing must be nonnegative");
  }
  if (antisqueezing_db < squeezing_db) {
    throw std::invalid_argument(
        "antisqueezing below squeezing is non-physical");
  }
  const double v_sq = kVacuumVariance * std::pow(10.0, -squeezing_db / 10.0);
  const double v_anti =
      kVacuumVariance * std::pow(10.0, antisqueezing_db / 10.0);
  const double v_a = 0.5 * (v_sq + v_anti);
  const double z = 0.5 * (v_anti - v_sq);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 4);
  g(0, 0) = g(1, 1) = g(2, 2) = g(3, 3) = v_a;
  g(0, 2) = g(2, 0) = z;
  g(1, 3) = g(3, 1) = -z;
  return CovarianceMatrix(std::move(g));
}

CovarianceMatrix apply_loss_excess(const CovarianceMatrix& gamma,
                                   double mu_loss, double mu_en) {
  if (mu_loss < 0.0 || mu_loss > 1.0) {
    throw std::invalid_argument("loss fraction must lie in [0,1]");
  }
  if (mu_en < 0.0) {
    throw std::invalid_argument("excess noise must be nonnegative");
  }
  const Eigen::Index d = gamma.matrix().rows();
  Eigen::MatrixXd out =
      (1.0 - mu_loss) * gamma.matrix() +
      (mu_loss + mu_en) * kVacuumVariance * Eigen::MatrixXd::Identity(d, d);
  return CovarianceMatrix(std::move(out));
}

namespace {

struct Williamson {
  Eigen::MatrixXd s;    // symplectic, Gamma = s * diag(nu) * s^T
  std::vector<double> nus;
};

Williamson williamson_decomposition(const Eigen::MatrixXd& gamma) {
  const int m = static_cast<int>(gamma.rows()) / 2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  if (es.info() != Eigen::Success) {
    throw NumericalError("Williamson: eigendecomposition of Gamma failed");
  }
  const Eigen::MatrixXd root = es.operatorSqrt();
  const Eigen::MatrixXd antisym = root * symplectic_form(m) * root;
  Eigen::RealSchur<Eigen::MatrixXd> schur(antisym);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("Williamson: Schur decomposition failed");
  }
  Eigen::MatrixXd u = schur.matrixU();
  const Eigen::MatrixXd& t = schur.matrixT();

  std::vector<double> nus(m);
  for (int k = 0; k < m; ++k) {
    const double b = t(2 * k, 2 * k + 1);
    nus[k] = std::abs(b);
    if (b < 0.0) {
      u.col(2 * k).swap(u.col(2 * k + 1));
    }
  }
  Eigen::VectorXd inv_sqrt_d(2 * m);
  for (int k = 0; k < m; ++k) {
    if (nus[k] <= 0.0) {
      throw NumericalError("Williamson: vanishing symplectic eigenvalue");
    }
    inv_sqrt_d(2 * k) = inv_sqrt_d(2 * k + 1) = 1.0 / std::sqrt(nus[k]);
  }
  Williamson w;
  w.s = root * u * inv_sqrt_d.asDiagonal();
  w.nus = std::move(nus);

  Eigen::VectorXd d(2 * m);
  for (int k = 0; k < m; ++k) {
    d(2 * k) = d(2 * k + 1) = w.nus[k];
  }
  const double residual =
      (w.s * d.asDiagonal() * w.s.transpose() - gamma).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if (residual > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "Williamson decomposition did not converge: residual " << residual
        << ", matrix scale " << scale;
    throw NumericalError(msg.str());
  }
  return w;
}

}  // namespace

CovarianceMatrix gaussian_purification(const CovarianceMatrix& gamma_ab) {
  const int m = gamma_ab.modes();
  const Williamson w = williamson_decomposition(gamma_ab.matrix());

  // Each thermal mode nu gets a two-mode-squeezer partner in E with cross
  // correlations z = sqrt(nu^2 - 1/4); the partner of a pure mode stays in
  // vacuum.
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  Eigen::MatrixXd env = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int k = 0; k < m; ++k) {
    const double nu = w.nus[k];
    const double z = std::sqrt(std::max(nu * nu - 0.25, 0.0));
    cross(2 * k, 2 * k) = z;
    cross(2 * k + 1, 2 * k + 1) = -z;
    env(2 * k, 2 * k) = env(2 * k + 1, 2 * k + 1) = nu;
  }
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(4 * m, 4 * m);
  full.topLeftCorner(2 * m, 2 * m) = gamma_ab.matrix();
  full.topRightCorner(2 * m, 2 * m) = w.s * cross;
  full.bottomLeftCorner(2 * m, 2 * m) = (w.s * cross).transpose();
  full.bottomRightCorner(2 * m, 2 * m) = env;
  return CovarianceMatrix(std::move(full));
}

CovarianceMatrix condition_on_homodyne(const CovarianceMatrix& gamma,
                                       int measured_mode, Quadrature quad) {
  const int m = gamma.modes();
  if (measured_mode < 0 || measured_mode >= m) {
    throw std::invalid_argument("condition_on_homodyne: invalid mode index");
  }
  if (m < 2) {
    throw std::invalid_argument("condition_on_homodyne: nothing remains");
  }
  const Eigen::Index meas =
      2 * measured_mode + (quad == Quadrature::q ? 0 : 1);
  const double var = gamma(meas, meas);
  if (var < 1e-12) {
    throw std::invalid_argument(
        "condition_on_homodyne: measured quadrature variance below 1e-12");
  }
  std::vector<Eigen::Index> rest;
  rest.reserve(2 * (m - 1));
  for (Eigen::Index i = 0; i < 2 * m; ++i) {
    if (i / 2 != measured_mode) {
      rest.push_back(i);
    }
  }
  Eigen::VectorXd c(rest.size());
  Eigen::MatrixXd sub(rest.size(), rest.size());
  for (size_t i = 0; i < rest.size(); ++i) {
    c(i) = gamma(rest[i], meas);
    for (size_t j = 0; j < rest.size(); ++j) {
      sub(i, j) = gamma(rest[i], rest[j]);
    }
  }
  // Rank-1 Schur complement on the measured quadrature direction.
  sub -= (c * c.transpose()) / var;
  return CovarianceMatrix(std::move(sub));
}

}  // namespace cvqkd
