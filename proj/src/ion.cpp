#include "hds/ion.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hds::ion {

using spinops::Axis;

void IonParams::validate() const {
  if (n_ions < 1 || n_ions > 4) throw std::invalid_argument("ion model supports 1..4 ions");
  if (n_max < 2) throw std::invalid_argument("n_max must be at least 2");
  if (omega_z.size() != n_ions || delta_m.size() != n_ions)
    throw std::invalid_argument("need one rotated-term amplitude and offset per ion");
  if (!(eta >= 0.0)) throw std::invalid_argument("Lamb-Dicke parameter must be non-negative");
  if (delta == nu) throw std::invalid_argument("Raman detuning must differ from the mode frequency");
}

std::vector<std::string> IonParams::warnings() const {
  std::vector<std::string> w;
  if (eta > 0.2) w.push_back("Lamb-Dicke parameter above 0.2");
  const double gap = std::abs(delta - nu);
  for (std::size_t m = 0; m < n_ions; ++m) {
    const double dressed = std::hypot(omega_z[m], delta_m[m]);
    if (dressed == 0.0) continue;
    if (!(std::abs(j_eff()) < 0.2 * dressed)) w.push_back("J_eff is not small against the dressed gap of ion " + std::to_string(m));
    if (!(dressed < 0.2 * gap)) w.push_back("dressed gap of ion " + std::to_string(m) + " is not small against delta - nu");
  }
  return w;
}

double IonParams::j_eff() const { return j_raman * j_raman * eta * eta / (delta - nu); }
double IonParams::theta(std::size_t m) const { return std::atan2(omega_z.at(m), delta_m.at(m)); }
double IonParams::drive_detuning(std::size_t m) const { return omega_c - delta_m.at(m); }

double IonParams::light_shift() const {
  return -j_raman * j_raman * omega_c / (2 * (delta * delta - omega_c * omega_c));
}

spinops::TensorLayout IonParams::layout() const {
  spinops::TensorLayout l;
  l.n_spins = n_ions;
  l.boson_dim = n_max;
  return l;
}

IonModel::IonModel(const IonParams& p) : p_(p) {
  p_.validate();
  const auto layout = p_.layout();
  const std::size_t nb = p_.n_max;
  const auto b = spinops::ladder(spinops::Ladder::lower, nb).dense();
  const auto bd = spinops::ladder(spinops::Ladder::raise, nb).dense();

  // exp(-2 i eta (b + b^dag)) from the spectrum of the real symmetric quadrature.
  const Eigen::MatrixXd x = (b + bd).real();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
  Eigen::VectorXcd phases(static_cast<Eigen::Index>(nb));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(nb); ++k)
    phases[k] = std::exp(cplx(0.0, -2.0 * p_.eta * es.eigenvalues()[k]));
  displacement_ = es.eigenvectors().cast<cplx>() * phases.asDiagonal() * es.eigenvectors().transpose().cast<cplx>();

  const auto boson = [&](const CMat& m) {
    return spinops::embed(spinops::OperatorMatrix::from_dense(m), layout.boson_site(), layout).to_dense();
  };
  const auto spin = [&](const CMat& m, std::size_t site) {
    return spinops::embed(spinops::OperatorMatrix::from_dense(m), site, layout).to_dense();
  };

  number_ = boson(bd * b);
  const CMat disp = boson(displacement_);
  h0_ = p_.nu * number_;
  sideband_ = CMat::Zero(number_.rows(), number_.cols());
  for (std::size_t i = 0; i < p_.n_ions; ++i) {
    const double trim = p_.trim_light_shift ? p_.light_shift() : 0.0;
    h0_ += (p_.omega_c / 2 - trim) * spin(spinops::pauli(Axis::x), i);
    sideband_ += spin(spinops::sigma_minus(), i) * disp;
    raise_.push_back(spin(spinops::sigma_plus(), i));
  }
}

CMat IonModel::eff_xx(double t) const {
  const cplx ph = std::exp(cplx(0.0, -p_.delta * t));
  CMat s = ph * sideband_;
  return h0_ - p_.j_raman * (s + s.adjoint());
}

CMat IonModel::rotated_drive(double t) const {
  CMat r = CMat::Zero(h0_.rows(), h0_.cols());
  for (std::size_t m = 0; m < p_.n_ions; ++m) {
    if (p_.omega_z[m] == 0.0) continue;
    const CMat term = p_.omega_z[m] * std::exp(cplx(0.0, p_.drive_detuning(m) * t)) * raise_[m];
    r += term + term.adjoint();
  }
  return r;
}

spinops::OperatorMatrix build_eff_xx(const IonParams& p, double t) {
  IonModel m(p);
  CMat h = m.eff_xx(t);
  h = 0.5 * (h + h.adjoint());
  return spinops::OperatorMatrix::from_dense(h, true);
}

spinops::OperatorMatrix build_rotated_drive(const IonParams& p, double t) {
  IonModel m(p);
  CMat h = m.rotated_drive(t);
  h = 0.5 * (h + h.adjoint());
  return spinops::OperatorMatrix::from_dense(h, true);
}

spinops::OperatorMatrix build_target_xxz(const IonParams& p) {
  p.validate();
  spinops::TensorLayout layout;
  layout.n_spins = p.n_ions;
  const double j = p.j_eff();
  CMat h = CMat::Zero(static_cast<Eigen::Index>(layout.dim()), static_cast<Eigen::Index>(layout.dim()));
  for (std::size_t i = 0; i < p.n_ions; ++i)
    for (std::size_t k = 0; k < p.n_ions; ++k) {
      if (i == k) continue;
      const double ci = std::cos(p.theta(i)), ck = std::cos(p.theta(k));
      const double si = std::sin(p.theta(i)), sk = std::sin(p.theta(k));
      h += j * ci * ck * spinops::pauli_string({{i, Axis::x}, {k, Axis::x}}, layout).to_dense();
      h += j * 0.5 * si * sk *
           (spinops::pauli_string({{i, Axis::z}, {k, Axis::z}}, layout).to_dense() +
            spinops::pauli_string({{i, Axis::y}, {k, Axis::y}}, layout).to_dense());
    }
  return spinops::OperatorMatrix::from_dense(h, true);
}

CMat label_rotation(const IonParams& p) {
  p.validate();
  CMat u = CMat::Identity(1, 1);
  for (std::size_t m = 0; m < p.n_ions; ++m) {
    const double th = p.theta(m);
    CMat r = std::cos(th / 2) * spinops::identity2() + cplx(0.0, std::sin(th / 2)) * spinops::pauli(Axis::y);
    CMat next(u.rows() * 2, u.cols() * 2);
    for (Eigen::Index a = 0; a < u.rows(); ++a)
      for (Eigen::Index b = 0; b < u.cols(); ++b) next.block(a * 2, b * 2, 2, 2) = u(a, b) * r;
    u = next;
  }
  return u;
}

CMat target_bare(const IonParams& p) {
  const CMat u = label_rotation(p);
  return u * build_target_xxz(p).dense() * u.adjoint();
}

std::pair<CVec, CVec> label_states(const IonParams& p, std::size_t m) {
  const double th = p.theta(m);
  if (p.labels == IonParams::Labels::literal) return model::dressed_basis(th);
  // Polar angle of the axis measured from z.
  return model::dressed_basis(std::numbers::pi / 2 - th);
}

CVec initial_spin_state(const IonParams& p) {
  p.validate();
  CVec psi = CVec::Ones(1);
  for (std::size_t m = 0; m < p.n_ions; ++m) {
    const auto [up, down] = label_states(p, m);
    const CVec& local = (m % 2 == 0) ? up : down;
    CVec next(psi.size() * 2);
    for (Eigen::Index a = 0; a < psi.size(); ++a) next.segment(a * 2, 2) = psi[a] * local;
    psi = next;
  }
  return psi;
}

namespace {

// exp(i phi (n . sigma)) for a unit vector n in the x-z plane.
CMat xz_rotation(double phi, double nx, double nz) {
  CMat r = std::cos(phi) * spinops::identity2();
  r += cplx(0.0, std::sin(phi)) * (nx * spinops::pauli(Axis::x) + nz * spinops::pauli(Axis::z));
  return r;
}

CMat kron_all(const std::vector<CMat>& ops) {
  CMat u = CMat::Identity(1, 1);
  for (const auto& r : ops) {
    CMat next(u.rows() * r.rows(), u.cols() * r.cols());
    for (Eigen::Index a = 0; a < u.rows(); ++a)
      for (Eigen::Index b = 0; b < u.cols(); ++b) next.block(a * r.rows(), b * r.cols(), r.rows(), r.cols()) = u(a, b) * r;
    u = next;
  }
  return u;
}

}  // namespace

CVec to_comparison_frame(const IonModel& model, double t, const CVec& psi, bool inverse) {
  const IonParams& p = model.params();
  const double s = inverse ? -1.0 : 1.0;
  std::vector<CMat> dressed, carrier;
  for (std::size_t m = 0; m < p.n_ions; ++m) {
    const double w = std::hypot(p.delta_m[m], p.omega_z[m]);
    const double nx = w > 0.0 ? p.delta_m[m] / w : 1.0;
    const double nz = w > 0.0 ? p.omega_z[m] / w : 0.0;
    dressed.push_back(xz_rotation(s * w * t / 2, nx, nz));
    carrier.push_back(xz_rotation(s * p.drive_detuning(m) * t / 2, 1.0, 0.0));
  }
  const CMat spin_frame = inverse ? CMat(kron_all(carrier) * kron_all(dressed)) : CMat(kron_all(dressed) * kron_all(carrier));
  const auto nb = static_cast<Eigen::Index>(p.n_max);
  const Eigen::Index ns = spin_frame.rows();
  if (psi.size() != ns * nb) throw std::invalid_argument("state has the wrong dimension");
  // Boson phase exp(i s nu n t), then the spin rotation on each boson slice.
  CMat m(ns, nb);
  for (Eigen::Index a = 0; a < ns; ++a)
    for (Eigen::Index n = 0; n < nb; ++n)
      m(a, n) = psi[a * nb + n] * std::exp(cplx(0.0, s * p.nu * static_cast<double>(n) * t));
  const CMat out = spin_frame * m;
  CVec v(psi.size());
  for (Eigen::Index a = 0; a < ns; ++a)
    for (Eigen::Index n = 0; n < nb; ++n) v[a * nb + n] = out(a, n);
  return v;
}

namespace {

std::array<double, 4> spin_traces(const CMat& rho, const CVec& ud, const CVec& du) {
  const cplx c = du.dot(rho * ud);
  return {ud.dot(rho * ud).real(), du.dot(rho * du).real(), c.real(), c.imag()};
}

CMat reduce_spins(const CVec& psi, Eigen::Index ns, Eigen::Index nb) {
  CMat m(ns, nb);
  for (Eigen::Index a = 0; a < ns; ++a)
    for (Eigen::Index n = 0; n < nb; ++n) m(a, n) = psi[a * nb + n];
  return m * m.adjoint();
}

}  // namespace

XXZTraces compare_xxz(const IonParams& p, double t_final, double dt, std::size_t store_every,
                      propagate::Method method) {
  if (p.n_ions != 2) throw std::invalid_argument("the XXZ comparison is defined for two ions");
  IonModel model(p);
  const auto nb = static_cast<Eigen::Index>(p.n_max);
  const CVec spin0 = initial_spin_state(p);
  const Eigen::Index ns = spin0.size();
  CVec psi0 = CVec::Zero(ns * nb);
  for (Eigen::Index a = 0; a < ns; ++a) psi0[a * nb] = spin0[a];

  // Reference labels |up_theta down_theta> and |down_theta up_theta>.
  const auto [u0, d0] = label_states(p, 0);
  const auto [u1, d1] = label_states(p, 1);
  const CVec ud = kron_all({CMat(u0), CMat(d1)}).col(0);
  const CVec du = kron_all({CMat(d0), CMat(u1)}).col(0);

  Eigen::SelfAdjointEigenSolver<CMat> target(target_bare(p));

  propagate::PropagationConfig cfg;
  cfg.dt = dt;
  cfg.t_final = t_final;
  cfg.store_every = store_every;
  cfg.method = method;

  XXZTraces out;
  propagate::DenseHamiltonian h(model.dim(), [&model](double t) { return model.total(t); });
  const auto stats = propagate::evolve(h, psi0, cfg, [&](std::size_t, double t, const CVec& psi) {
    out.times.push_back(t);
    out.max_phonons = std::max(out.max_phonons, psi.dot(model.number() * psi).real());
    const CVec framed = to_comparison_frame(model, t, psi);
    const auto f = spin_traces(reduce_spins(framed, ns, nb), ud, du);
    const Eigen::VectorXcd ph = (cplx(0.0, -t) * target.eigenvalues().cast<cplx>()).array().exp();
    const CVec psi_t = target.eigenvectors() * ph.asDiagonal() * (target.eigenvectors().adjoint() * spin0);
    const auto g = spin_traces(psi_t * psi_t.adjoint(), ud, du);
    for (std::size_t k = 0; k < 4; ++k) {
      out.full[k].push_back(f[k]);
      out.target[k].push_back(g[k]);
      out.max_deviation = std::max(out.max_deviation, std::abs(f[k] - g[k]));
    }
  });
  out.max_norm_drift = stats.max_norm_drift;
  return out;
}

XXZVerification verify_xxz(const IonParams& p, double t_final, double dt, std::size_t store_every,
                           propagate::Method method) {
  XXZVerification v;
  v.traces = compare_xxz(p, t_final, dt, store_every, method);
  IonParams big = p;
  big.n_max = 2 * p.n_max;
  v.n_max_check = big.n_max;
  const XXZTraces check = compare_xxz(big, t_final, dt, store_every, method);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t s = 0; s < check.full[k].size(); ++s)
      v.truncation_delta = std::max(v.truncation_delta, std::abs(check.full[k][s] - v.traces.full[k][s]));
  if (v.truncation_delta > 1e-4) {
    std::ostringstream msg;
    msg << "Fock truncation not converged: doubling n_max to " << big.n_max << " moves the traces by "
        << v.truncation_delta;
    throw std::runtime_error(msg.str());
  }
  if (v.traces.max_phonons >= 0.5 * static_cast<double>(p.n_max)) {
    std::ostringstream msg;
    msg << "phonon number " << v.traces.max_phonons << " reaches n_max / 2";
    throw std::runtime_error(msg.str());
  }
  return v;
}

}  // namespace hds::ion
