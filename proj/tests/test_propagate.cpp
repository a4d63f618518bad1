#include "hds/propagate.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace hds;
using spinops::Axis;
constexpr double kTwoPi = 2 * std::numbers::pi;

namespace {

propagate::PropagationConfig cfg(double dt, double t_final, std::size_t every = 1) {
  propagate::PropagationConfig c;
  c.dt = dt;
  c.t_final = t_final;
  c.store_every = every;
  return c;
}

model::SystemSpec single(double rabi) {
  model::SystemSpec s;
  s.layout.n_spins = 1;
  s.first_drive = {{rabi, 0.0, model::Fluctuation::none}};
  return s;
}

CVec up() {
  CVec v = CVec::Zero(2);
  v[0] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("zero Hamiltonian leaves the state alone") {
  auto s = single(0.0);
  s.noise.dephasing = {{0.0, 1.0}};
  const noise::NoiseRealization r = model::build_realization(s, noise::TimeGrid::covering(0.1, 1.0), 1);
  CVec psi(2);
  psi << 0.6, cplx(0, 0.8);
  for (const auto& st : propagate::evolve_trajectory(s, r, psi, cfg(0.1, 1.0))) CHECK((st - psi).norm() < 1e-15);
}

TEST_CASE("Rabi oscillation") {
  const double om = 3.7;
  const auto s = single(om);
  const auto r = model::build_realization(s, noise::TimeGrid::covering(0.01, 2.0), 1);
  const auto states = propagate::evolve_trajectory(s, r, up(), cfg(0.01, 2.0, 10));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double t = 0.1 * k;
    CHECK(std::abs(states[k][0] - std::cos(om * t / 2)) < 1e-8);
  }
}

TEST_CASE("zz phase evolution against the diagonal solution") {
  model::SystemSpec s;
  s.layout.n_spins = 2;
  s.convention = model::SpinConvention::half;
  s.coupling = Eigen::MatrixXd::Zero(2, 2);
  s.coupling(0, 1) = s.coupling(1, 0) = 1.3;
  const auto r = model::build_realization(s, noise::TimeGrid::covering(0.05, 3.0), 1);
  const CVec psi0 = CVec::Constant(4, 0.5);  // |up_x up_x>
  const auto states = propagate::evolve_trajectory(s, r, psi0, cfg(0.05, 3.0, 20));
  const double zz[4] = {1, -1, -1, 1};
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double t = 1.0 * k;
    for (int i = 0; i < 4; ++i) CHECK(std::abs(states[k][i] - 0.5 * std::exp(cplx(0, -1.3 / 4 * zz[i] * t))) < 1e-10);
  }
}

TEST_CASE("Krylov path agrees with dense exponentials") {
  model::SystemSpec s;
  s.layout.n_spins = 8;
  s.first_drive.assign(8, {2.0, 0.3, model::Fluctuation::none});
  s.coupling = Eigen::MatrixXd::Constant(8, 8, 0.4);
  s.coupling.diagonal().setZero();
  model::PauliModel m(s);
  std::vector<double> c;
  m.coefficients(nullptr, 0, 0, c);
  const CMat h = m.sum().dense(c);
  CVec psi = CVec::Zero(256);
  psi[3] = 1.0;
  const auto r = model::build_realization(s, noise::TimeGrid::covering(0.05, 1.0), 1);
  const auto states = propagate::evolve_trajectory(s, r, psi, cfg(0.05, 1.0, 20));
  const CVec ref = CMat(cplx(0, -1.0) * h).exp() * psi;
  CHECK((states.back() - ref).norm() < 1e-8);
}

TEST_CASE("magnus4 is fourth order on a chirped drive") {
  auto h = [](double t) {
    CMat m = (1.0 + 0.8 * t) * spinops::pauli(Axis::x) + 0.5 * std::sin(2 * t) * spinops::pauli(Axis::z);
    return m;
  };
  auto final_state = [&](double dt, propagate::Method method) {
    propagate::DenseHamiltonian H(2, h);
    auto c = cfg(dt, 2.0, static_cast<std::size_t>(std::llround(2.0 / dt)));
    c.method = method;
    CVec out;
    propagate::evolve(H, up(), c, [&](std::size_t, double, const CVec& p) { out = p; });
    return out;
  };
  const CVec ref = final_state(0.0005, propagate::Method::magnus4);
  const double e1 = (final_state(0.1, propagate::Method::magnus4) - ref).norm();
  const double e2 = (final_state(0.05, propagate::Method::magnus4) - ref).norm();
  CHECK(e1 / e2 > 12.0);  // 16 for a clean fourth-order method
  const double p1 = (final_state(0.1, propagate::Method::expm_piecewise) - ref).norm();
  const double p2 = (final_state(0.05, propagate::Method::expm_piecewise) - ref).norm();
  CHECK(p1 / p2 > 3.0);
  CHECK(p1 / p2 < 5.0);
}

TEST_CASE("step size guard") {
  CHECK_NOTHROW(propagate::check_step_size(0.1, std::numbers::pi));
  CHECK_THROWS(propagate::check_step_size(0.11, std::numbers::pi));
}

TEST_CASE("norm drift aborts instead of renormalizing") {
  propagate::DenseHamiltonian H(2, [](double) { CMat m = 50.0 * spinops::pauli(Axis::x); return m; }, true);
  auto c = cfg(0.5, 5.0);
  c.method = propagate::Method::rk4;
  CHECK_THROWS_AS(propagate::evolve(H, up(), c, nullptr), propagate::PropagationError);
}

TEST_CASE("pairwise sum") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * i;
  CHECK(propagate::pairwise_sum(v.data(), v.size()) == doctest::Approx(49950.0));
  CHECK(propagate::pairwise_sum(v.data(), 500, 2) == doctest::Approx(0.1 * 2 * 124750));
}

TEST_CASE("single-trajectory ensemble equals the bare trajectory") {
  auto s = single(2.0);
  s.first_drive[0].fluctuation = model::Fluctuation::shared_amp_phase;
  s.noise.dephasing = {{0.5, 3.0}};
  s.noise.drive_amp = {0.2, 3.0};
  const auto c = cfg(0.02, 1.0, 5);
  const auto rec = propagate::run_ensemble(s, 0.1, up(), {propagate::projector("p_up", up())}, c, {1, 42, 1});
  const auto r = model::build_realization(s, noise::TimeGrid::covering(0.1, 1.0), noise::derive_seed(42, 0));
  const auto states = propagate::evolve_trajectory(s, r, up(), c);
  for (std::size_t k = 0; k < states.size(); ++k) {
    CHECK(rec.traces[0].mean[k] == doctest::Approx(std::norm(states[k][0])).epsilon(1e-14));
    CHECK(rec.traces[0].sem[k] == 0.0);
  }
}

TEST_CASE("zero noise gives zero standard error") {
  const auto rec = propagate::run_ensemble(single(2.0), 0.1, up(), {propagate::projector("p_up", up())}, cfg(0.02, 1.0, 5), {8, 1, 1});
  for (double e : rec.traces[0].sem) CHECK(e == 0.0);
}

TEST_CASE("ensemble results do not depend on the worker count") {
  auto s = single(1.0);
  s.noise.dephasing = {{1.0, 2.0}};
  const CVec p = CVec::Constant(2, 1 / std::sqrt(2.0));
  const auto c = cfg(0.05, 2.0, 4);
  const auto a = propagate::run_ensemble(s, 0.1, p, {propagate::projector("f", p)}, c, {37, 9, 1});
  const auto b = propagate::run_ensemble(s, 0.1, p, {propagate::projector("f", p)}, c, {37, 9, 4});
  CHECK(a.traces[0].mean == b.traces[0].mean);
  CHECK(a.traces[0].sem == b.traces[0].sem);
}

TEST_CASE("bare dephasing follows the OU cumulant law") {
  const double delta = kTwoPi * 0.2, tau_c = 20.0;
  auto s = single(0.0);
  s.noise.dephasing = {{delta, tau_c}};
  const CVec p = CVec::Constant(2, 1 / std::sqrt(2.0));
  const auto rec = propagate::run_ensemble(s, 0.05, p, {propagate::projector("f", p)}, cfg(0.05, 3.0, 10), {400, 2024, 1});
  for (std::size_t k = 1; k < rec.times.size(); k += 5) {
    const double t = rec.times[k];
    const double f = 0.5 * (1 + std::exp(-delta * delta * (tau_c * t - tau_c * tau_c * (1 - std::exp(-t / tau_c)))));
    CHECK(std::abs(rec.traces[0].mean[k] - f) < 4 * rec.traces[0].sem[k] + 1e-3);
  }
}

TEST_CASE("misaligned grids are rejected") {
  CHECK_THROWS(cfg(0.03, 1.0).validate());
  CHECK_THROWS(propagate::run_ensemble(single(1.0), 0.025, up(), {}, cfg(0.02, 1.0), {1, 1, 1}));
}
