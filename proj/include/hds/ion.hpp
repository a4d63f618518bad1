#pragma once

#include "hds/propagate.hpp"
#include "hds/spinops.hpp"

#include <array>
#include <string>
#include <vector>

namespace hds::ion {

struct IonParams {
  double j_raman = 0.0;  // Omega_1 Omega_0 / (4 Delta), rad/us
  double eta = 0.0;      // Lamb-Dicke parameter
  double nu = 0.0;       // mode frequency, rad/us
  double delta = 0.0;    // Raman detuning, rad/us
  double omega_c = 0.0;  // carrier dressing, rad/us
  std::vector<double> omega_z;  // rotated-term amplitude per ion, rad/us
  std::vector<double> delta_m;  // rotated-term offset per ion, rad/us
  std::size_t n_max = 6;
  std::size_t n_ions = 2;
  // Cancel the second-order carrier light shift by trimming the dressing term.
  bool trim_light_shift = true;
  // literal: |up_theta> = cos(theta/2)|up> + sin(theta/2)|down> in the bare z basis.
  // energy_axis: eigenstates of the rotated-term axis (cos theta, 0, sin theta) . sigma.
  enum class Labels { literal, energy_axis };
  Labels labels = Labels::energy_axis;

  void validate() const;
  std::vector<std::string> warnings() const;
  double j_eff() const;                          // J^2 eta^2 / (delta - nu)
  double theta(std::size_t m) const;             // atan2(omega_z, delta_m)
  double drive_detuning(std::size_t m) const;    // omega_c - delta_m
  // Coefficient of sigma_x per ion left by the off-resonant carrier at second order.
  double light_shift() const;
  spinops::TensorLayout layout() const;          // spins then the boson
};

// Static pieces of the spin-boson Hamiltonian, built once per parameter set.
class IonModel {
 public:
  explicit IonModel(const IonParams& p);

  const IonParams& params() const { return p_; }
  std::size_t dim() const { return static_cast<std::size_t>(h0_.rows()); }

  CMat eff_xx(double t) const;
  CMat rotated_drive(double t) const;
  CMat total(double t) const { return eff_xx(t) + rotated_drive(t); }

  const CMat& number() const { return number_; }
  const CMat& displacement() const { return displacement_; }

 private:
  IonParams p_;
  CMat h0_;            // nu b^dag b + (omega_c / 2) sum sigma_x
  CMat sideband_;      // sum_i sigma_-^i D
  std::vector<CMat> raise_;  // sigma_+^m on the full space
  CMat number_;
  CMat displacement_;  // exp(-2 i eta (b + b^dag)) on the boson space
};

spinops::OperatorMatrix build_eff_xx(const IonParams& p, double t);
spinops::OperatorMatrix build_rotated_drive(const IonParams& p, double t);

// Target XXZ model in the rotated labels (sigma_x along each ion's quantization axis n,
// sigma_z along m = n rotated by +pi/2 about y); ordered double sum over ion pairs.
spinops::OperatorMatrix build_target_xxz(const IonParams& p);
// Product of exp(i theta_m sigma_y / 2): carries rotated labels to bare ones.
CMat label_rotation(const IonParams& p);
CMat target_bare(const IonParams& p);

// Dressed pair (up, down) used to label ion m.
std::pair<CVec, CVec> label_states(const IonParams& p, std::size_t m);

// |up_theta down_theta ...> on the spins alone.
CVec initial_spin_state(const IonParams& p);

// psi_2 = exp(i H_x t) exp(i sum (delta_m / 2) sigma_x t) exp(i nu n t) psi (or the inverse).
CVec to_comparison_frame(const IonModel& model, double t, const CVec& psi, bool inverse = false);

struct XXZTraces {
  std::vector<double> times;
  // p(up down), p(down up), Re and Im of <down up|rho|up down>, all in theta-dressed labels.
  std::array<std::vector<double>, 4> full;
  std::array<std::vector<double>, 4> target;
  double max_deviation = 0.0;
  double max_phonons = 0.0;
  double max_norm_drift = 0.0;
};

inline const std::array<const char*, 4> kTraceNames{"p_ud", "p_du", "re_coh", "im_coh"};

XXZTraces compare_xxz(const IonParams& p, double t_final, double dt, std::size_t store_every,
                      propagate::Method method = propagate::Method::magnus4);

struct XXZVerification {
  XXZTraces traces;
  double truncation_delta = 0.0;  // max change of any full-model trace when n_max doubles
  std::size_t n_max_check = 0;
};

// Runs compare_xxz at n_max and 2 n_max; throws if the traces move by more than 1e-4
// or the phonon number reaches n_max / 2.
XXZVerification verify_xxz(const IonParams& p, double t_final, double dt, std::size_t store_every,
                           propagate::Method method = propagate::Method::magnus4);

}  // namespace hds::ion
