#pragma once

#include "hds/noise.hpp"
#include "hds/spinops.hpp"

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hds::model {

enum class Frame { lab, first_interaction, second_interaction };
enum class SpinConvention { half, full };
enum class Fluctuation { none, shared_amp_phase };
enum class Modulation { constant, ramp_up, ramp_down };

std::string to_string(Frame f);
std::string to_string(SpinConvention c);

// Resonant (or detuned) drive on one site.
struct DriveSpec {
  double rabi = 0.0;
  double detuning = 0.0;
  Fluctuation fluctuation = Fluctuation::none;
  double mixing_angle() const;  // tan(theta) = rabi / detuning
};

// Protection drives of the dressed frame, one amplitude per pair.
struct SecondDriveSpec {
  std::vector<double> rabi_prime;
  Fluctuation fluctuation = Fluctuation::none;
  // Zero keeps the sublattice-averaged yy couplings; positive values switch the b-site
  // drive sign every half period and apply the instantaneous couplings.
  double trotter_period = 0.0;
};

// Directly engineered Pauli term: strength * modulation(t) * word.
struct ExtraTerm {
  std::vector<std::pair<std::size_t, spinops::Axis>> word;
  double strength = 0.0;
  Modulation modulation = Modulation::constant;
};

struct SystemSpec {
  spinops::TensorLayout layout;
  Eigen::MatrixXd coupling;  // site-level a_ij, empty for none
  std::vector<DriveSpec> first_drive;  // one per site
  std::optional<SecondDriveSpec> second_drive;
  std::vector<ExtraTerm> extra_terms;
  double ramp_time = 0.0;
  Frame frame = Frame::first_interaction;
  SpinConvention convention = SpinConvention::half;
  noise::NoiseSpec noise;
  // The shared amplitude trace describes fluctuations of a drive with this Rabi frequency;
  // other drives see it scaled by their own amplitude. Zero means "largest drive".
  double reference_rabi = 0.0;

  void validate() const;
  std::size_t n_sites() const { return layout.n_spins; }
  double reference() const;
  std::vector<double> site_angles() const;
  // Largest coefficient magnitude of any noiseless term, rad/us.
  double max_coefficient() const;
};

// Hamiltonian as a fixed set of Pauli words with time-dependent real weights.
class PauliModel {
 public:
  explicit PauliModel(const SystemSpec& spec);

  const spinops::PauliSum& sum() const { return sum_; }
  const SystemSpec& spec() const { return spec_; }

  // Noise is read from the grid cell holding t_hold; schedules are evaluated at t_sched.
  void coefficients(const noise::NoiseRealization* r, double t_hold, double t_sched,
                    std::vector<double>& out) const;

  // Trotter segment boundaries inside [0, t_final), for step alignment checks.
  std::vector<double> switch_times(double t_final) const;

 private:
  enum class Kind { constant, drive_cos, drive_sin, dephasing, trotter, ramp_up, ramp_down };
  struct Weight {
    Kind kind;
    double base;
    std::size_t site = 0;
    std::size_t other = 0;
    bool fluctuates = false;
  };
  void add(const std::vector<std::pair<std::size_t, spinops::Axis>>& word, Weight w);
  double trotter_sign(std::size_t site, double t) const;

  SystemSpec spec_;
  spinops::PauliSum sum_;
  std::vector<Weight> weights_;
  std::vector<bool> is_b_site_;
};

// H(t) on a realization grid point.
spinops::OperatorMatrix hamiltonian_at(const SystemSpec& system, const noise::NoiseRealization& r,
                                       double t);

noise::NoiseRealization build_realization(const SystemSpec& system, const noise::TimeGrid& grid,
                                          std::uint64_t seed);

std::pair<CVec, CVec> dressed_basis(double theta);

// Isometry from N logical spins onto the hybrid subspace of N site pairs.
class HybridEncoding {
 public:
  explicit HybridEncoding(const spinops::TensorLayout& layout);

  std::size_t n_pairs() const { return layout_.pairing.size(); }
  std::size_t logical_dim() const { return std::size_t{1} << n_pairs(); }
  std::size_t physical_dim() const { return layout_.spin_dim(); }
  const spinops::TensorLayout& layout() const { return layout_; }

  // Local pair vectors |up~>, |down~> on (site_a, site_b), site_a the more significant factor.
  static std::array<Eigen::Vector4d, 2> pair_basis();

  CVec encode(const CVec& logical) const;     // V psi, requires a normalized input
  CVec isometry_apply(const CVec& logical) const;  // V psi, no checks
  CVec project(const CVec& physical) const;   // V^dagger psi
  CMat isometry() const;

 private:
  spinops::TensorLayout layout_;
  std::vector<std::uint32_t> to_paired_;  // physical index -> pair-adjacent index
};

double leakage(const HybridEncoding& enc, const CVec& physical);

}  // namespace hds::model
