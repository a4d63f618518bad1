#include "hds/propagate.hpp"

#include "hds/units.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace hds::propagate {

void PropagationConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(t_final >= 0.0)) throw std::invalid_argument("t_final must be non-negative");
  if (store_every == 0) throw std::invalid_argument("store_every must be at least 1");
  const double steps = t_final / dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
    throw std::invalid_argument("t_final must be an integer multiple of dt");
}

std::size_t PropagationConfig::n_steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

std::size_t PropagationConfig::n_samples() const { return n_steps() / store_every + 1; }

std::vector<double> PropagationConfig::sample_times() const {
  std::vector<double> ts(n_samples());
  for (std::size_t s = 0; s < ts.size(); ++s) ts[s] = static_cast<double>(s * store_every) * dt;
  return ts;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::expm_piecewise: return "expm_piecewise";
    case Method::rk4: return "rk4";
    case Method::magnus4: return "magnus4";
  }
  return "?";
}

CMat TimeDependentHamiltonian::dense_at(double) const {
  throw std::logic_error("this generator cannot be sampled at arbitrary times");
}

unsigned default_threads() {
  if (const char* env = std::getenv("HDS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

void check_step_size(double dt, double max_coefficient) {
  const double f_max = max_coefficient / units::two_pi;
  if (f_max <= 0.0) return;
  const double limit = 1.0 / (20.0 * f_max);
  if (dt > limit * (1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "dt = " << dt << " us exceeds the resolution limit " << limit
        << " us set by the largest coefficient (" << f_max << " MHz)";
    throw std::invalid_argument(msg.str());
  }
}

PauliHamiltonian::PauliHamiltonian(std::shared_ptr<const model::PauliModel> model,
                                   std::optional<noise::NoiseRealization> realization)
    : model_(std::move(model)), realization_(std::move(realization)) {}

bool PauliHamiltonian::freeze(double t, double dt) {
  model_->coefficients(realization_ ? &*realization_ : nullptr, t, t + dt / 2, scratch_);
  if (has_frozen_ && scratch_ == coeffs_) return false;
  coeffs_.swap(scratch_);
  if (dim() < spinops::kDenseLimit)
    dense_ = model_->sum().dense(coeffs_);
  else
    sparse_ = model_->sum().freeze(coeffs_);
  has_frozen_ = true;
  return true;
}

CMat PauliHamiltonian::frozen_dense() const {
  if (dim() < spinops::kDenseLimit) return dense_;
  return model_->sum().dense(coeffs_);
}

void PauliHamiltonian::frozen_apply(const CVec& in, CVec& out) const {
  if (dim() < spinops::kDenseLimit)
    out.noalias() = dense_ * in;
  else
    sparse_.apply(in, out);
}

DenseHamiltonian::DenseHamiltonian(std::size_t dim, Fn at, bool time_independent)
    : dim_(dim), at_(std::move(at)), time_independent_(time_independent) {}

bool DenseHamiltonian::freeze(double t, double dt) {
  if (time_independent_ && has_frozen_) return false;
  m_ = at_(t + dt / 2);
  if (static_cast<std::size_t>(m_.rows()) != dim_ || m_.rows() != m_.cols())
    throw std::invalid_argument("generator returned a matrix of the wrong size");
  has_frozen_ = true;
  return true;
}

namespace {

const double kGauss1 = 0.5 - std::sqrt(3.0) / 6;
const double kGauss2 = 0.5 + std::sqrt(3.0) / 6;
// Weights of the first exponential applied; the second uses them swapped.
const double kMagnusA = 0.25 + std::sqrt(3.0) / 6;
const double kMagnusB = 0.25 - std::sqrt(3.0) / 6;

}  // namespace

EvolveStats evolve(TimeDependentHamiltonian& h, CVec psi, const PropagationConfig& cfg,
                   const Observer& observe) {
  cfg.validate();
  if (static_cast<std::size_t>(psi.size()) != h.dim())
    throw std::invalid_argument("initial state has the wrong dimension");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw std::invalid_argument("initial state is not normalized");

  EvolveStats stats;
  const std::size_t n = cfg.n_steps();
  const bool dense = h.dim() < spinops::kDenseLimit;
  const double dt = cfg.dt;
  CMat U;
  CVec tmp(psi.size()), k1, k2, k3, k4;
  KrylovStats ks;
  const MatVec apply = [&h](const CVec& in, CVec& out) { h.frozen_apply(in, out); };

  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * dt;
    if (i % cfg.store_every == 0 && observe) observe(i / cfg.store_every, t, psi);
    if (i == n) break;
    if (cfg.method == Method::magnus4) {
      if (!dense) throw std::invalid_argument("magnus4 needs a dense generator");
      const CMat h1 = h.dense_at(t + kGauss1 * dt);
      const CMat h2 = h.dense_at(t + kGauss2 * dt);
      tmp.noalias() = (cplx(0.0, -dt) * (kMagnusA * h1 + kMagnusB * h2)).exp() * psi;
      psi.noalias() = (cplx(0.0, -dt) * (kMagnusB * h1 + kMagnusA * h2)).exp() * tmp;
    } else if (cfg.method == Method::expm_piecewise) {
      const bool changed = h.freeze(t, dt);
      if (dense) {
        if (changed || U.size() == 0) U = (cplx(0.0, -dt) * h.frozen_dense()).exp();
        tmp.noalias() = U * psi;
        psi.swap(tmp);
      } else {
        krylov_expv(apply, psi, dt, cfg.krylov_tol, &ks);
      }
    } else {
      h.freeze(t, dt);
      const cplx mi(0.0, -1.0);
      apply(psi, k1);
      k1 *= mi;
      apply(psi + (dt / 2) * k1, k2);
      k2 *= mi;
      apply(psi + (dt / 2) * k2, k3);
      k3 *= mi;
      apply(psi + dt * k3, k4);
      k4 *= mi;
      psi += (dt / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ks.matvecs += 4;
    }
    const double drift = std::abs(psi.norm() - 1.0);
    stats.max_norm_drift = std::max(stats.max_norm_drift, drift);
    if (drift > 1e-6) {
      std::ostringstream msg;
      msg << "norm drift " << drift << " at step " << i + 1 << " (t = " << t + dt
          << " us); the step dt = " << dt << " us is too coarse for this Hamiltonian";
      throw PropagationError(msg.str());
    }
  }
  stats.steps = n;
  stats.matvecs = ks.matvecs;
  return stats;
}

std::vector<CVec> evolve_trajectory(const model::SystemSpec& system,
                                    const noise::NoiseRealization& realization, const CVec& psi0,
                                    const PropagationConfig& cfg) {
  auto m = std::make_shared<const model::PauliModel>(system);
  PauliHamiltonian h(m, realization);
  std::vector<CVec> states;
  states.reserve(cfg.n_samples());
  evolve(h, psi0, cfg, [&](std::size_t, double, const CVec& psi) { states.push_back(psi); });
  return states;
}

Observable expectation(const std::string& name, spinops::OperatorMatrix op) {
  if (!op.hermitian()) throw std::invalid_argument("observable '" + name + "' is not hermitian");
  return {name, [op = std::move(op)](std::size_t, double, const CVec& psi) {
            return op.expectation(psi).real();
          }};
}

Observable projector(const std::string& name, const CVec& state) {
  return {name, [state](std::size_t, double, const CVec& psi) {
            if (psi.size() != state.size()) throw std::invalid_argument("dimension mismatch");
            return std::norm(state.dot(psi));
          }};
}

Observable reference_fidelity(const std::string& name, std::shared_ptr<const std::vector<CVec>> refs) {
  return {name, [refs = std::move(refs)](std::size_t s, double, const CVec& psi) {
            const CVec& r = refs->at(s);
            if (psi.size() != r.size()) throw std::invalid_argument("dimension mismatch");
            return std::norm(r.dot(psi));
          }};
}

const ObservableTrace& RunRecord::trace(const std::string& name) const {
  for (const auto& t : traces)
    if (t.name == name) return t;
  throw std::out_of_range("no trace named '" + name + "'");
}

void RunRecord::append(const RunRecord& other, const std::string& prefix) {
  if (other.times.size() != times.size()) throw std::invalid_argument("cannot merge records on different grids");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(other.times[i] - times[i]) > 1e-9 * std::max(1.0, std::abs(times[i])))
      throw std::invalid_argument("cannot merge records on different grids");
  for (const auto& t : other.traces) traces.push_back({prefix + t.name, t.mean, t.sem});
}

double pairwise_sum(const double* values, std::size_t n, std::size_t stride) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i * stride];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half, stride) + pairwise_sum(values + half * stride, n - half, stride);
}

RunRecord run_ensemble(const HamiltonianFactory& make, const CVec& psi0,
                       const std::vector<Observable>& observables, const PropagationConfig& prop,
                       const EnsembleConfig& ens) {
  prop.validate();
  if (ens.n_traj == 0) throw std::invalid_argument("n_traj must be at least 1");
  const std::size_t n_obs = observables.size();
  const std::size_t n_samp = prop.n_samples();
  const std::size_t n_traj = ens.n_traj;

  // data[obs][sample][traj]: the reduction below walks trajectories in index order.
  std::vector<double> data(n_obs * n_samp * n_traj, 0.0);
  std::vector<std::string> errors(n_traj);
  std::vector<char> failed(n_traj, 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= n_traj) return;
      try {
        const std::uint64_t seed = noise::derive_seed(ens.master_seed, j);
        auto h = make(j, seed);
        evolve(*h, psi0, prop, [&](std::size_t s, double t, const CVec& psi) {
          for (std::size_t o = 0; o < n_obs; ++o) data[(o * n_samp + s) * n_traj + j] = observables[o].eval(s, t, psi);
        });
      } catch (const std::exception& e) {
        errors[j] = e.what();
        failed[j] = 1;
      }
    }
  };

  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, ens.threads), n_traj));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t j = 0; j < n_traj; ++j)
    if (failed[j]) {
      std::ostringstream msg;
      msg << "trajectory " << j << " (seed " << noise::derive_seed(ens.master_seed, j) << ") failed: " << errors[j];
      throw PropagationError(msg.str());
    }

  RunRecord rec;
  rec.times = prop.sample_times();
  rec.seed = ens.master_seed;
  rec.n_traj = n_traj;
  std::vector<double> dev(n_traj);
  for (std::size_t o = 0; o < n_obs; ++o) {
    ObservableTrace tr{observables[o].name, std::vector<double>(n_samp), std::vector<double>(n_samp)};
    for (std::size_t s = 0; s < n_samp; ++s) {
      const double* col = &data[(o * n_samp + s) * n_traj];
      const double mean = pairwise_sum(col, n_traj) / static_cast<double>(n_traj);
      double sem = 0.0;
      // Identical samples give an exact zero rather than rounding residue.
      const bool constant = std::all_of(col, col + n_traj, [&](double v) { return v == col[0]; });
      if (n_traj > 1 && !constant) {
        for (std::size_t j = 0; j < n_traj; ++j) dev[j] = (col[j] - mean) * (col[j] - mean);
        const double var = pairwise_sum(dev.data(), n_traj) / static_cast<double>(n_traj - 1);
        sem = std::sqrt(var / static_cast<double>(n_traj));
      }
      tr.mean[s] = mean;
      tr.sem[s] = sem;
    }
    rec.traces.push_back(std::move(tr));
  }
  rec.conventions["ou_amplitude_is_stddev"] = true;
  rec.parameters["dt_us"] = prop.dt;
  rec.parameters["t_final_us"] = prop.t_final;
  rec.parameters["store_every"] = prop.store_every;
  rec.parameters["method"] = to_string(prop.method);
  return rec;
}

RunRecord run_ensemble(const model::SystemSpec& system, double noise_dt, const CVec& psi0,
                       const std::vector<Observable>& observables, const PropagationConfig& prop,
                       const EnsembleConfig& ens) {
  prop.validate();
  const double ratio = noise_dt / prop.dt;
  if (!(ratio >= 1.0 - 1e-9) || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw std::invalid_argument("the noise grid step must be an integer multiple of dt");
  check_step_size(prop.dt, system.max_coefficient());
  auto model = std::make_shared<const model::PauliModel>(system);
  for (double ts : model->switch_times(prop.t_final)) {
    const double k = ts / prop.dt;
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
      throw std::invalid_argument("Trotter half period must be an integer multiple of dt");
  }
  const noise::TimeGrid grid = noise::TimeGrid::covering(noise_dt, prop.t_final);
  HamiltonianFactory make = [&system, model, grid](std::size_t, std::uint64_t seed) {
    return std::make_unique<PauliHamiltonian>(model, model::build_realization(system, grid, seed));
  };
  RunRecord rec = run_ensemble(make, psi0, observables, prop, ens);
  rec.conventions["spin_operator_convention"] = model::to_string(system.convention);
  rec.conventions["frame"] = model::to_string(system.frame);
  rec.parameters["noise_dt_us"] = noise_dt;
  return rec;
}

}  // namespace hds::propagate
