#include "hds/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hds::model {

using spinops::Axis;

std::string to_string(Frame f) {
  switch (f) {
    case Frame::lab: return "lab";
    case Frame::first_interaction: return "first_interaction";
    case Frame::second_interaction: return "second_interaction";
  }
  return "?";
}

std::string to_string(SpinConvention c) { return c == SpinConvention::half ? "half" : "full"; }

double DriveSpec::mixing_angle() const { return std::atan2(rabi, detuning); }

void SystemSpec::validate() const {
  layout.validate();
  const std::size_t n = layout.n_spins;
  if (n == 0) throw std::invalid_argument("system has no sites");
  if (layout.boson_dim != 0) throw std::invalid_argument("spin systems carry no boson mode");
  if (!first_drive.empty() && first_drive.size() != n)
    throw std::invalid_argument("first_drive needs one entry per site");
  for (const auto& d : first_drive)
    if (!(d.rabi >= 0.0)) throw std::invalid_argument("drive Rabi frequency must be non-negative");
  if (coupling.size() != 0) {
    if (static_cast<std::size_t>(coupling.rows()) != n || coupling.rows() != coupling.cols())
      throw std::invalid_argument("coupling matrix must be n_sites x n_sites");
    for (std::size_t i = 0; i < n; ++i) {
      if (coupling(i, i) != 0.0) throw std::invalid_argument("coupling matrix needs a zero diagonal");
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(coupling(i, j) - coupling(j, i)) > 1e-15 * std::max(1.0, std::abs(coupling(i, j))))
          throw std::invalid_argument("coupling matrix must be symmetric");
    }
  }
  if (!noise.dephasing.empty() && noise.dephasing.size() != n)
    throw std::invalid_argument("dephasing needs one OU process per site");
  for (const auto& p : noise.dephasing) p.validate();
  noise.drive_amp.validate();
  noise.drive_phase.validate();
  for (const auto& term : extra_terms) {
    for (auto [s, a] : term.word)
      if (s >= n) throw std::invalid_argument("extra term references an invalid site");
    if (term.modulation != Modulation::constant && !(ramp_time > 0.0))
      throw std::invalid_argument("ramped terms need a positive ramp_time");
  }
  switch (frame) {
    case Frame::lab:
      throw std::invalid_argument("the lab frame is not simulated; use first_interaction");
    case Frame::first_interaction:
      if (second_drive) throw std::invalid_argument("protection drives need the second_interaction frame");
      break;
    case Frame::second_interaction: {
      if (!second_drive) throw std::invalid_argument("second_interaction frame needs protection drives");
      if (2 * layout.pairing.size() != n)
        throw std::invalid_argument("second_interaction frame needs every site paired");
      if (second_drive->rabi_prime.size() != layout.pairing.size())
        throw std::invalid_argument("need one protection amplitude per pair");
      for (double w : second_drive->rabi_prime)
        if (!(w > 0.0)) throw std::invalid_argument("protection amplitudes must be positive");
      if (first_drive.empty()) throw std::invalid_argument("mixing angles need first_drive entries");
      if (second_drive->trotter_period < 0.0) throw std::invalid_argument("negative Trotter period");
      break;
    }
  }
}

double SystemSpec::reference() const {
  if (reference_rabi > 0.0) return reference_rabi;
  double m = 0.0;
  if (frame == Frame::second_interaction && second_drive)
    for (double w : second_drive->rabi_prime) m = std::max(m, w);
  else
    for (const auto& d : first_drive) m = std::max(m, d.rabi);
  return m;
}

std::vector<double> SystemSpec::site_angles() const {
  std::vector<double> th(layout.n_spins, 0.0);
  for (std::size_t s = 0; s < first_drive.size(); ++s) th[s] = first_drive[s].mixing_angle();
  return th;
}

double SystemSpec::max_coefficient() const {
  PauliModel m(*this);
  std::vector<double> c;
  double best = 0.0;
  for (double t : {0.0, ramp_time}) {
    m.coefficients(nullptr, t, t, c);
    for (double v : c) best = std::max(best, std::abs(v));
  }
  return best;
}

PauliModel::PauliModel(const SystemSpec& spec) : spec_(spec), sum_(spec.layout.n_spins) {
  spec_.validate();
  const std::size_t n = spec_.layout.n_spins;
  is_b_site_.assign(n, false);
  for (auto [a, b] : spec_.layout.pairing) is_b_site_[b] = true;

  const double conv = spec_.convention == SpinConvention::half ? 0.25 : 1.0;
  const bool has_dephasing = !spec_.noise.dephasing.empty();

  if (spec_.frame == Frame::first_interaction) {
    for (std::size_t s = 0; s < spec_.first_drive.size(); ++s) {
      const DriveSpec& d = spec_.first_drive[s];
      const bool fl = d.fluctuation == Fluctuation::shared_amp_phase;
      if (d.rabi != 0.0) {
        add({{s, Axis::x}}, {Kind::drive_cos, d.rabi / 2, s, 0, fl});
        if (fl) add({{s, Axis::y}}, {Kind::drive_sin, d.rabi / 2, s, 0, fl});
      }
      if (d.detuning != 0.0) add({{s, Axis::z}}, {Kind::constant, d.detuning / 2});
    }
  } else {
    const auto& sd = *spec_.second_drive;
    const bool fl = sd.fluctuation == Fluctuation::shared_amp_phase;
    for (std::size_t k = 0; k < spec_.layout.pairing.size(); ++k) {
      auto [a, b] = spec_.layout.pairing[k];
      for (std::size_t s : {a, b}) {
        add({{s, Axis::x}}, {Kind::drive_cos, sd.rabi_prime[k] / 2, s, 0, fl});
        if (fl) add({{s, Axis::y}}, {Kind::drive_sin, sd.rabi_prime[k] / 2, s, 0, fl});
      }
    }
  }
  if (has_dephasing)
    for (std::size_t s = 0; s < n; ++s)
      if (spec_.noise.dephasing[s].amplitude > 0.0) add({{s, Axis::z}}, {Kind::dephasing, 0.5, s});

  if (spec_.coupling.size() != 0) {
    const auto th = spec_.site_angles();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double a = spec_.coupling(i, j) * conv;
        if (a == 0.0) continue;
        if (spec_.frame == Frame::first_interaction) {
          add({{i, Axis::z}, {j, Axis::z}}, {Kind::constant, a});
          continue;
        }
        const double zz = a * std::cos(th[i]) * std::cos(th[j]);
        const double xy = a * std::sin(th[i]) * std::sin(th[j]) / 2;
        if (std::abs(zz) > 1e-15 * std::abs(a)) add({{i, Axis::z}, {j, Axis::z}}, {Kind::constant, zz});
        if (std::abs(xy) > 1e-15 * std::abs(a)) {
          add({{i, Axis::x}, {j, Axis::x}}, {Kind::constant, xy});
          if (spec_.second_drive->trotter_period > 0.0)
            add({{i, Axis::y}, {j, Axis::y}}, {Kind::trotter, xy, i, j});
          else if (is_b_site_[i] == is_b_site_[j])
            add({{i, Axis::y}, {j, Axis::y}}, {Kind::constant, xy});
        }
      }
  }

  for (const auto& term : spec_.extra_terms) {
    Kind k = term.modulation == Modulation::ramp_up     ? Kind::ramp_up
             : term.modulation == Modulation::ramp_down ? Kind::ramp_down
                                                        : Kind::constant;
    add(term.word, {k, term.strength});
  }
}

void PauliModel::add(const std::vector<std::pair<std::size_t, Axis>>& word, Weight w) {
  sum_.add(word);
  weights_.push_back(w);
}

double PauliModel::trotter_sign(std::size_t site, double t) const {
  if (!is_b_site_[site]) return 1.0;
  const double half = spec_.second_drive->trotter_period / 2;
  const auto seg = static_cast<long long>(std::floor(t / half));
  return (seg % 2 == 0) ? 1.0 : -1.0;
}

void PauliModel::coefficients(const noise::NoiseRealization* r, double t_hold, double t_sched,
                              std::vector<double>& out) const {
  out.resize(weights_.size());
  std::size_t cell = 0;
  if (r) cell = r->grid.cell(t_hold);
  const double ref = spec_.reference();
  double amp_rel = 0.0, phase = 0.0;
  if (r) {
    if (!r->drive_amp.empty() && ref > 0.0) amp_rel = r->drive_amp[cell] / ref;
    if (!r->drive_phase.empty()) phase = r->drive_phase[cell];
  }
  const double T = spec_.ramp_time;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const Weight& w = weights_[k];
    double v = w.base;
    switch (w.kind) {
      case Kind::constant:
        break;
      case Kind::drive_cos:
        if (w.fluctuates) v = w.base * (1.0 + amp_rel) * std::cos(phase);
        break;
      case Kind::drive_sin:
        v = w.fluctuates ? w.base * (1.0 + amp_rel) * std::sin(phase) : 0.0;
        break;
      case Kind::dephasing:
        v = (r && w.site < r->dephasing.size()) ? w.base * r->dephasing[w.site][cell] : 0.0;
        break;
      case Kind::trotter:
        v = w.base * trotter_sign(w.site, t_sched) * trotter_sign(w.other, t_sched);
        break;
      case Kind::ramp_up:
        v = w.base * (t_sched / T);
        break;
      case Kind::ramp_down:
        v = w.base * (1.0 - t_sched / T);
        break;
    }
    out[k] = v;
  }
}

std::vector<double> PauliModel::switch_times(double t_final) const {
  std::vector<double> ts;
  if (spec_.frame != Frame::second_interaction || spec_.second_drive->trotter_period <= 0.0) return ts;
  const double half = spec_.second_drive->trotter_period / 2;
  for (double t = half; t < t_final; t += half) ts.push_back(t);
  return ts;
}

spinops::OperatorMatrix hamiltonian_at(const SystemSpec& system, const noise::NoiseRealization& r,
                                       double t) {
  const double x = t / r.grid.dt;
  if (std::abs(x - std::round(x)) > 1e-9 * std::max(1.0, std::abs(x)) || x < -1e-9 ||
      std::round(x) > static_cast<double>(r.grid.n - 1))
    throw std::out_of_range("time " + std::to_string(t) + " is not on the realization grid");
  PauliModel m(system);
  std::vector<double> c;
  m.coefficients(&r, t, t, c);
  return m.sum().matrix(c);
}

noise::NoiseRealization build_realization(const SystemSpec& system, const noise::TimeGrid& grid,
                                          std::uint64_t seed) {
  return noise::build_realization(system.noise, grid, seed);
}

std::pair<CVec, CVec> dressed_basis(double theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw std::invalid_argument("theta must lie in [0, pi]");
  CVec up(2), down(2);
  up << std::cos(theta / 2), std::sin(theta / 2);
  down << std::sin(theta / 2), -std::cos(theta / 2);
  return {up, down};
}

HybridEncoding::HybridEncoding(const spinops::TensorLayout& layout) : layout_(layout) {
  layout_.validate();
  if (layout_.boson_dim != 0) throw std::invalid_argument("hybrid encoding acts on spins only");
  if (layout_.pairing.empty() || 2 * layout_.pairing.size() != layout_.n_spins)
    throw std::invalid_argument("hybrid encoding needs every site paired");
  const std::size_t n = layout_.n_spins;
  to_paired_.resize(physical_dim());
  for (std::size_t i = 0; i < physical_dim(); ++i) {
    std::size_t p = 0;
    for (std::size_t k = 0; k < n_pairs(); ++k) {
      auto [a, b] = layout_.pairing[k];
      const std::size_t ba = (i >> (n - 1 - a)) & 1u;
      const std::size_t bb = (i >> (n - 1 - b)) & 1u;
      p |= ba << (n - 1 - 2 * k);
      p |= bb << (n - 2 - 2 * k);
    }
    to_paired_[i] = static_cast<std::uint32_t>(p);
  }
}

std::array<Eigen::Vector4d, 2> HybridEncoding::pair_basis() {
  // |up_x down_x> +- |down_x up_x>, normalized, written in the z basis (uu, ud, du, dd).
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Vector4d up(r, 0.0, 0.0, -r);
  Eigen::Vector4d down(0.0, -r, r, 0.0);
  return {up, down};
}

CVec HybridEncoding::project(const CVec& physical) const {
  if (static_cast<std::size_t>(physical.size()) != physical_dim())
    throw std::invalid_argument("physical state has the wrong dimension");
  const auto basis = pair_basis();
  CVec cur(physical.size());
  for (std::size_t i = 0; i < physical_dim(); ++i) cur[to_paired_[i]] = physical[static_cast<Eigen::Index>(i)];
  const std::size_t P = n_pairs();
  for (std::size_t k = 0; k < P; ++k) {
    const std::size_t left = std::size_t{1} << k;
    const std::size_t right = std::size_t{1} << (2 * (P - 1 - k));
    CVec next(static_cast<Eigen::Index>(left * 2 * right));
    for (std::size_t l = 0; l < left; ++l)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t r = 0; r < right; ++r) {
          cplx acc = 0.0;
          for (std::size_t m = 0; m < 4; ++m) {
            const double w = basis[u][static_cast<Eigen::Index>(m)];
            if (w != 0.0) acc += w * cur[static_cast<Eigen::Index>((l * 4 + m) * right + r)];
          }
          next[static_cast<Eigen::Index>((l * 2 + u) * right + r)] = acc;
        }
    cur = std::move(next);
  }
  return cur;
}

CVec HybridEncoding::isometry_apply(const CVec& logical) const {
  if (static_cast<std::size_t>(logical.size()) != logical_dim())
    throw std::invalid_argument("logical state has the wrong dimension");
  const auto basis = pair_basis();
  const std::size_t P = n_pairs();
  CVec cur = logical;
  for (std::size_t k = 0; k < P; ++k) {
    const std::size_t left = std::size_t{1} << (2 * k);
    const std::size_t right = std::size_t{1} << (P - 1 - k);
    CVec next = CVec::Zero(static_cast<Eigen::Index>(left * 4 * right));
    for (std::size_t l = 0; l < left; ++l)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t r = 0; r < right; ++r) {
          const cplx v = cur[static_cast<Eigen::Index>((l * 2 + u) * right + r)];
          for (std::size_t m = 0; m < 4; ++m)
            next[static_cast<Eigen::Index>((l * 4 + m) * right + r)] += basis[u][static_cast<Eigen::Index>(m)] * v;
        }
    cur = std::move(next);
  }
  CVec out(cur.size());
  for (std::size_t i = 0; i < physical_dim(); ++i) out[static_cast<Eigen::Index>(i)] = cur[to_paired_[i]];
  return out;
}

CVec HybridEncoding::encode(const CVec& logical) const {
  if (static_cast<std::size_t>(logical.size()) != logical_dim())
    throw std::invalid_argument("logical state has the wrong dimension");
  if (std::abs(logical.norm() - 1.0) > 1e-10) throw std::invalid_argument("logical state is not normalized");
  return isometry_apply(logical);
}

CMat HybridEncoding::isometry() const {
  CMat v(physical_dim(), logical_dim());
  for (std::size_t j = 0; j < logical_dim(); ++j) {
    CVec e = CVec::Zero(static_cast<Eigen::Index>(logical_dim()));
    e[static_cast<Eigen::Index>(j)] = 1.0;
    v.col(static_cast<Eigen::Index>(j)) = isometry_apply(e);
  }
  return v;
}

double leakage(const HybridEncoding& enc, const CVec& physical) {
  const double kept = enc.project(physical).squaredNorm();
  return std::clamp(1.0 - kept, 0.0, 1.0);
}

}  // namespace hds::model
