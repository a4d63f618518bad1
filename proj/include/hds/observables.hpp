#pragma once

#include "hds/spinops.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace hds::observables {

// f = 1/2 (1 + e^{-1})
inline const double kCoherenceThreshold = 0.5 * (1.0 + std::exp(-1.0));

double fidelity(const CVec& ref, const CVec& psi);
double fidelity(const CVec& ref, const CMat& rho);

struct CoherenceCurve {
  std::vector<double> times;
  std::vector<double> f_mean;
  std::vector<double> f_sem;
};

struct CoherenceTime {
  double value = 0.0;        // crossing time, or the window length when lower_bound is set
  bool lower_bound = false;  // no crossing inside the window: T > value
};

CoherenceTime coherence_time(const CoherenceCurve& curve);

// sum_{k<l} exp(-i q (l - k)) C(k, l); only the strict upper triangle of C is read,
// NaN entries count as missing.
cplx structure_factor(const Eigen::MatrixXd& correlators, double q);

// <X_k X_l> on an n-spin state (site 0 most significant). Works on unnormalized
// projected states, so leakage lowers the correlator instead of being renormalized away.
double xx_correlator(const CVec& state, std::size_t n, std::size_t k, std::size_t l);
Eigen::MatrixXd xx_correlators(const CVec& state, std::size_t n);

// Wootters concurrence of a two-qubit density matrix.
double concurrence(const CMat& rho);
double concurrence(const CVec& psi);

}  // namespace hds::observables
