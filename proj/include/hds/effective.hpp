#pragma once

#include "hds/model.hpp"
#include "hds/spinops.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace hds::effective {

using Pairing = std::vector<std::pair<std::size_t, std::size_t>>;

// Dressed-frame couplings: J^x_ij = a_ij sin(th_i) sin(th_j) / 2, J^z_ij = a_ij cos(th_i) cos(th_j).
struct CouplingTable {
  Eigen::MatrixXd jx;
  Eigen::MatrixXd jz;
  std::vector<double> pair_angles;
};

// Logical model sum_k h_k Z_k - sum_{k<l} g_kl X_k X_l.
struct HybridModelParams {
  std::vector<double> h;
  Eigen::MatrixXd g;  // symmetric, zero diagonal
};

struct AlternationSchedule {
  std::size_t K = 1;
  std::vector<double> amplitudes;

  void validate() const;
  double amplitude_for_pair(std::size_t m) const { return amplitudes[m % K]; }
  double min_gap() const;
};

CouplingTable coupling_table(const model::SystemSpec& system, const std::vector<double>& pair_angles);
HybridModelParams hybrid_params(const CouplingTable& table, const Pairing& pairing);

// The protection drives vanish on the hybrid subspace, so include_hp adds nothing to the
// logical operator; the flag is kept so callers can state which form they compare against.
spinops::OperatorMatrix effective_hamiltonian(const HybridModelParams& params, bool include_hp = false);

// Unit-spaced chain of n_pairs pairs, pair m on sites (2m, 2m+1), a_ij = a |i-j|^-alpha.
spinops::TensorLayout chain_layout(std::size_t n_pairs);
Eigen::MatrixXd chain_coupling(std::size_t n_pairs, double a, double alpha);
// Closed form of g for two pairs D apart on that chain (all angles pi/2).
double chain_g(std::size_t D, double a, double alpha);

// Strength, as a fraction of a, of the closest same-amplitude site pair under K-periodic driving.
double residual_coupling(std::size_t K, double alpha);
// The same quantity found by scanning every inter-pair site pair of a chain.
double residual_coupling_scan(const AlternationSchedule& schedule, std::size_t n_pairs, double alpha);

struct RangeFit {
  double alpha_e = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t d_min = 0, d_max = 0;
  std::vector<double> distances;
  std::vector<double> couplings;
};

RangeFit range_exponent(double alpha, std::size_t n_pairs, std::size_t d_min, std::size_t d_max);

// b-site drive sign flips every half period; a sites keep +1.
struct TrotterSchedule {
  double period = 0.0;
  std::vector<bool> b_site;

  double sign(std::size_t site, double t) const;
  std::vector<double> boundaries(double t_final) const;
};

TrotterSchedule trotter_schedule(const Pairing& pairs, std::size_t n_sites, double period);

// Time-averaged yy weight between sites k and l: (1 + (-1)^{k-l}) / 2.
double sublattice_factor(long k, long l);

}  // namespace hds::effective
