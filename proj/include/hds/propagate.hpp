#pragma once

#include "hds/krylov.hpp"
#include "hds/model.hpp"
#include "hds/noise.hpp"
#include "hds/spinops.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hds::propagate {

// expm_piecewise: one exact exponential per step with H frozen at the step.
// magnus4: fourth-order commutator-free Magnus step from two Gauss-point samples of H
// (dense generators only).
enum class Method { expm_piecewise, rk4, magnus4 };

std::string to_string(Method m);

struct PropagationConfig {
  double dt = 1e-3;
  Method method = Method::expm_piecewise;
  double t_final = 0.0;
  std::size_t store_every = 1;
  double krylov_tol = 1e-10;

  void validate() const;
  std::size_t n_steps() const;
  std::size_t n_samples() const;
  std::vector<double> sample_times() const;
};

struct EnsembleConfig {
  std::size_t n_traj = 1;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
};

// Worker count from HDS_THREADS, falling back to 1.
unsigned default_threads();

// Enforces dt <= 1 / (20 f_max) with f_max the largest coefficient over 2 pi.
void check_step_size(double dt, double max_coefficient);

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Generator of one trajectory's dynamics, frozen step by step.
class TimeDependentHamiltonian {
 public:
  virtual ~TimeDependentHamiltonian() = default;
  virtual std::size_t dim() const = 0;
  // Freezes H on [t, t + dt). Returns false if it equals the previously frozen operator.
  virtual bool freeze(double t, double dt) = 0;
  virtual CMat frozen_dense() const = 0;
  virtual void frozen_apply(const CVec& in, CVec& out) const = 0;
  // Instantaneous dense H(t); needed by magnus4.
  virtual CMat dense_at(double t) const;
};

// Pauli-structured model: noise held on its grid, schedules sampled at the step midpoint.
class PauliHamiltonian final : public TimeDependentHamiltonian {
 public:
  PauliHamiltonian(std::shared_ptr<const model::PauliModel> model,
                   std::optional<noise::NoiseRealization> realization);

  std::size_t dim() const override { return model_->sum().dim(); }
  bool freeze(double t, double dt) override;
  CMat frozen_dense() const override;
  void frozen_apply(const CVec& in, CVec& out) const override;

 private:
  std::shared_ptr<const model::PauliModel> model_;
  std::optional<noise::NoiseRealization> realization_;
  std::vector<double> coeffs_, scratch_;
  bool has_frozen_ = false;
  CMat dense_;
  spinops::PauliSum::Frozen sparse_;
};

// Arbitrary dense generator evaluated at the step midpoint.
class DenseHamiltonian final : public TimeDependentHamiltonian {
 public:
  using Fn = std::function<CMat(double t)>;
  DenseHamiltonian(std::size_t dim, Fn at, bool time_independent = false);

  std::size_t dim() const override { return dim_; }
  bool freeze(double t, double dt) override;
  CMat frozen_dense() const override { return m_; }
  void frozen_apply(const CVec& in, CVec& out) const override { out.noalias() = m_ * in; }
  CMat dense_at(double t) const override { return at_(t); }

 private:
  std::size_t dim_;
  Fn at_;
  bool time_independent_;
  bool has_frozen_ = false;
  CMat m_;
};

using Observer = std::function<void(std::size_t sample, double t, const CVec& psi)>;

struct EvolveStats {
  std::size_t steps = 0;
  std::size_t matvecs = 0;
  double max_norm_drift = 0.0;
};

EvolveStats evolve(TimeDependentHamiltonian& h, CVec psi, const PropagationConfig& cfg,
                   const Observer& observe);

std::vector<CVec> evolve_trajectory(const model::SystemSpec& system,
                                    const noise::NoiseRealization& realization, const CVec& psi0,
                                    const PropagationConfig& cfg);

struct Observable {
  std::string name;
  std::function<double(std::size_t sample, double t, const CVec& psi)> eval;
};

Observable expectation(const std::string& name, spinops::OperatorMatrix op);
Observable projector(const std::string& name, const CVec& state);
// |<ref_s|psi>|^2 against one reference state per sample.
Observable reference_fidelity(const std::string& name, std::shared_ptr<const std::vector<CVec>> refs);

struct ObservableTrace {
  std::string name;
  std::vector<double> mean;
  std::vector<double> sem;  // sample standard deviation / sqrt(n_traj)
};

struct RunRecord {
  std::string axis = "t";
  std::vector<double> times;
  std::vector<ObservableTrace> traces;
  std::uint64_t seed = 0;
  std::size_t n_traj = 0;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json conventions = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  // Sidecar-only fields: they never reach the CSV.
  nlohmann::json config;
  double wall_time_s = 0.0;
  unsigned threads = 1;

  const ObservableTrace& trace(const std::string& name) const;
  void append(const RunRecord& other, const std::string& prefix);
};

using HamiltonianFactory =
    std::function<std::unique_ptr<TimeDependentHamiltonian>(std::size_t traj, std::uint64_t seed)>;

RunRecord run_ensemble(const HamiltonianFactory& make, const CVec& psi0,
                       const std::vector<Observable>& observables, const PropagationConfig& prop,
                       const EnsembleConfig& ens);

// Trajectory j draws its noise from derive_seed(master_seed, j) on a grid of step noise_dt,
// which must be an integer multiple of prop.dt.
RunRecord run_ensemble(const model::SystemSpec& system, double noise_dt, const CVec& psi0,
                       const std::vector<Observable>& observables, const PropagationConfig& prop,
                       const EnsembleConfig& ens);

double pairwise_sum(const double* values, std::size_t n, std::size_t stride = 1);

}  // namespace hds::propagate
