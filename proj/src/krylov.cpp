#include "hds/krylov.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace hds::propagate {

namespace {

// exp(-i T tau) e_1 for the symmetric tridiagonal T = tridiag(beta, alpha, beta).
Eigen::VectorXcd small_expm_e1(const std::vector<double>& alpha, const std::vector<double>& beta,
                               std::size_t m, double tau) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(m));
  Eigen::VectorXd e(static_cast<Eigen::Index>(m > 1 ? m - 1 : 0));
  for (std::size_t k = 0; k < m; ++k) d[static_cast<Eigen::Index>(k)] = alpha[k];
  for (std::size_t k = 0; k + 1 < m; ++k) e[static_cast<Eigen::Index>(k)] = beta[k];
  Eigen::VectorXcd y(static_cast<Eigen::Index>(m));
  if (m == 1) {
    y[0] = std::exp(cplx(0.0, -alpha[0] * tau));
    return y;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
  const Eigen::MatrixXd& S = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  Eigen::VectorXcd w(static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k)
    w[k] = std::exp(cplx(0.0, -lam[k] * tau)) * S(0, k);
  y = S.cast<cplx>() * w;
  return y;
}

// One Lanczos attempt over tau. Returns false if the estimate stays above tol.
bool lanczos_step(const MatVec& h, CVec& psi, double tau, double tol, std::size_t max_dim,
                  std::vector<CVec>& basis, KrylovStats* stats) {
  const double beta0 = psi.norm();
  if (beta0 == 0.0) return true;
  std::vector<double> alpha, beta;
  basis.resize(std::max(basis.size(), max_dim + 1));
  basis[0] = psi / beta0;
  CVec w(psi.size());
  const double breakdown = 1e-13 * beta0;

  for (std::size_t j = 0; j < max_dim; ++j) {
    h(basis[j], w);
    if (stats) ++stats->matvecs;
    double a = basis[j].dot(w).real();
    w -= a * basis[j];
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    // One extra pass against the two most recent vectors keeps the three-term recurrence honest.
    const cplx c0 = basis[j].dot(w);
    w -= c0 * basis[j];
    a += c0.real();
    if (j > 0) w -= basis[j - 1].dot(w) * basis[j - 1];
    alpha.push_back(a);
    const double b = w.norm();
    beta.push_back(b);

    const std::size_t m = j + 1;
    const Eigen::VectorXcd y = small_expm_e1(alpha, beta, m, tau);
    const double err = beta0 * b * std::abs(y[static_cast<Eigen::Index>(m - 1)]);
    if (err < tol || b < breakdown) {
      CVec out = CVec::Zero(psi.size());
      for (std::size_t k = 0; k < m; ++k) out += (beta0 * y[static_cast<Eigen::Index>(k)]) * basis[k];
      psi = std::move(out);
      return true;
    }
    basis[j + 1] = w / b;
  }
  return false;
}

}  // namespace

void krylov_expv(const MatVec& h, CVec& psi, double dt, double tol, KrylovStats* stats,
                 std::size_t max_dim) {
  if (!(dt >= 0.0)) throw std::invalid_argument("negative time step");
  std::vector<CVec> basis;
  double remaining = dt;
  double tau = dt;
  int halvings = 0;
  while (remaining > 0.0) {
    tau = std::min(tau, remaining);
    CVec trial = psi;
    if (lanczos_step(h, trial, tau, tol, max_dim, basis, stats)) {
      psi = std::move(trial);
      remaining -= tau;
      if (stats) ++stats->substeps;
      if (remaining < 1e-15 * dt) break;
      continue;
    }
    tau /= 2;
    if (++halvings > 40) throw std::runtime_error("Krylov exponential failed to converge");
  }
}

}  // namespace hds::propagate
