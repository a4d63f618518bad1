#include "hds/observables.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <stdexcept>

namespace hds::observables {

double fidelity(const CVec& ref, const CVec& psi) {
  if (ref.size() != psi.size()) throw std::invalid_argument("dimension mismatch");
  return std::norm(ref.dot(psi));
}

double fidelity(const CVec& ref, const CMat& rho) {
  if (rho.rows() != ref.size() || rho.cols() != ref.size()) throw std::invalid_argument("dimension mismatch");
  return ref.dot(rho * ref).real();
}

CoherenceTime coherence_time(const CoherenceCurve& c) {
  if (c.times.size() != c.f_mean.size() || c.times.empty())
    throw std::invalid_argument("coherence curve needs matching, non-empty times and values");
  const double th = kCoherenceThreshold;
  for (std::size_t i = 1; i < c.times.size(); ++i) {
    const double f0 = c.f_mean[i - 1], f1 = c.f_mean[i];
    if (f0 >= th && f1 < th) {
      const double x = (f0 - th) / (f0 - f1);
      return {c.times[i - 1] + x * (c.times[i] - c.times[i - 1]), false};
    }
  }
  if (c.f_mean.front() < th) return {c.times.front(), false};
  return {c.times.back(), true};
}

cplx structure_factor(const Eigen::MatrixXd& C, double q) {
  if (C.rows() != C.cols()) throw std::invalid_argument("correlator table must be square");
  cplx s = 0.0;
  for (Eigen::Index k = 0; k < C.rows(); ++k)
    for (Eigen::Index l = k + 1; l < C.cols(); ++l) {
      if (std::isnan(C(k, l))) throw std::invalid_argument("missing correlator for a site pair");
      s += std::exp(cplx(0.0, -q * static_cast<double>(l - k))) * C(k, l);
    }
  return s;
}

double xx_correlator(const CVec& state, std::size_t n, std::size_t k, std::size_t l) {
  if (static_cast<std::size_t>(state.size()) != (std::size_t{1} << n)) throw std::invalid_argument("dimension mismatch");
  if (k >= n || l >= n || k == l) throw std::invalid_argument("invalid site pair");
  const std::size_t m = (std::size_t{1} << (n - 1 - k)) | (std::size_t{1} << (n - 1 - l));
  double s = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.size()); ++i)
    s += (std::conj(state[static_cast<Eigen::Index>(i ^ m)]) * state[static_cast<Eigen::Index>(i)]).real();
  return s;
}

Eigen::MatrixXd xx_correlators(const CVec& state, std::size_t n) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = k + 1; l < n; ++l) C(k, l) = C(l, k) = xx_correlator(state, n, k, l);
  return C;
}

double concurrence(const CMat& rho) {
  if (rho.rows() != 4 || rho.cols() != 4) throw std::invalid_argument("concurrence needs a 4x4 density matrix");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8) throw std::invalid_argument("density matrix is not hermitian");
  if (std::abs(rho.trace().real() - 1.0) > 1e-6) throw std::invalid_argument("density matrix is not normalized");
  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  if (es.eigenvalues().minCoeff() < -1e-8) throw std::invalid_argument("density matrix is not positive semidefinite");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMat sq = es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  CMat yy = CMat::Zero(4, 4);
  yy(0, 3) = yy(3, 0) = -1.0;
  yy(1, 2) = yy(2, 1) = 1.0;
  const CMat tilde = yy * rho.conjugate() * yy;
  CMat m = sq * tilde * sq;
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es2(m, Eigen::EigenvaluesOnly);
  std::vector<double> l(4);
  for (int i = 0; i < 4; ++i) l[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, es2.eigenvalues()[i]));
  std::sort(l.begin(), l.end(), std::greater<>());
  return std::clamp(l[0] - l[1] - l[2] - l[3], 0.0, 1.0);
}

double concurrence(const CVec& psi) {
  if (psi.size() != 4) throw std::invalid_argument("concurrence needs a two-qubit state");
  return concurrence(CMat(psi * psi.adjoint()));
}

}  // namespace hds::observables
