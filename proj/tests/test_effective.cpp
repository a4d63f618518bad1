#include "hds/effective.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace hds;
using spinops::Axis;
constexpr double kPi = std::numbers::pi;

namespace {

// g between pairs k and l straight from the site couplings at theta = pi/2.
double direct_g(const Eigen::MatrixXd& a, std::size_t k, std::size_t l) {
  const std::size_t ka = 2 * k, kb = 2 * k + 1, la = 2 * l, lb = 2 * l + 1;
  return 0.5 * (a(ka, lb) + a(kb, la) - a(ka, la) - a(kb, lb));
}

model::SystemSpec chain(std::size_t P, double a, double alpha) {
  model::SystemSpec s;
  s.layout = effective::chain_layout(P);
  s.coupling = effective::chain_coupling(P, a, alpha);
  return s;
}

}  // namespace

TEST_CASE("g on the chain matches the site-level sum and the closed form") {
  const auto s = chain(6, 1.3, 3.0);
  const auto t = effective::coupling_table(s, std::vector<double>(6, kPi / 2));
  const auto p = effective::hybrid_params(t, s.layout.pairing);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t l = k + 1; l < 6; ++l) {
      CHECK(p.g(k, l) == doctest::Approx(direct_g(s.coupling, k, l)).epsilon(1e-12));
      CHECK(p.g(k, l) == doctest::Approx(effective::chain_g(l - k, 1.3, 3.0)).epsilon(1e-12));
    }
  CHECK(p.g(0, 1) / 1.3 == doctest::Approx(0.3935185185).epsilon(1e-9));
}

TEST_CASE("hybrid parameters are linear in the coupling matrix") {
  auto s1 = chain(3, 1.0, 2.0), s2 = chain(3, 1.0, 1.0);
  auto s12 = s1;
  s12.coupling = 2.0 * s1.coupling + 0.5 * s2.coupling;
  const std::vector<double> th{0.7, 1.1, kPi / 2};
  const auto p1 = effective::hybrid_params(effective::coupling_table(s1, th), s1.layout.pairing);
  const auto p2 = effective::hybrid_params(effective::coupling_table(s2, th), s2.layout.pairing);
  const auto p12 = effective::hybrid_params(effective::coupling_table(s12, th), s12.layout.pairing);
  CHECK((p12.g - (2.0 * p1.g + 0.5 * p2.g)).norm() < 1e-12);
}

TEST_CASE("effective Hamiltonian form") {
  effective::HybridModelParams p;
  p.h = {0.3, -0.2};
  p.g = Eigen::MatrixXd::Zero(2, 2);
  p.g(0, 1) = p.g(1, 0) = 0.5;
  spinops::TensorLayout l;
  l.n_spins = 2;
  const CMat ref = 0.3 * spinops::pauli_string({{0, Axis::z}}, l).to_dense() - 0.2 * spinops::pauli_string({{1, Axis::z}}, l).to_dense() -
                   0.5 * spinops::pauli_string({{0, Axis::x}, {1, Axis::x}}, l).to_dense();
  CHECK((effective::effective_hamiltonian(p).to_dense() - ref).norm() < 1e-12);
}

TEST_CASE("residual coupling values") {
  CHECK(effective::residual_coupling(3, 3) == doctest::Approx(0.008).epsilon(1e-12));
  CHECK(effective::residual_coupling(4, 3) == doctest::Approx(std::pow(7.0, -3)).epsilon(1e-12));
  for (std::size_t K : {2u, 3u, 4u}) {
    effective::AlternationSchedule s{K, {}};
    for (std::size_t k = 0; k < K; ++k) s.amplitudes.push_back(1.0 + k);
    CHECK(effective::residual_coupling_scan(s, 16, 3.0) == doctest::Approx(effective::residual_coupling(K, 3.0)));
  }
  CHECK_THROWS(effective::residual_coupling(1, 3));
}

TEST_CASE("range exponent tends to alpha + 2") {
  for (double alpha : {1.0, 2.0, 3.0}) {
    const auto fit = effective::range_exponent(alpha, 160, 40, 80);
    CHECK(fit.alpha_e == doctest::Approx(alpha + 2).epsilon(0.01));
  }
}

TEST_CASE("sublattice factor") {
  CHECK(effective::sublattice_factor(3, 1) == 1.0);
  CHECK(effective::sublattice_factor(2, 1) == 0.0);
  CHECK(effective::sublattice_factor(-1, 2) == 0.0);
}

TEST_CASE("two Trotter segments average the yy coupling by the sublattice factor") {
  // Two pairs, drives on b sites flipped in the second half: the first-order product
  // exp(-iH+ t) exp(-iH- t) equals exp(-i (H+ + H-) t) up to O(t^2).
  const auto l = effective::chain_layout(2);
  const auto ts = effective::trotter_schedule(l.pairing, 4, 1.0);
  CHECK(ts.sign(0, 0.7) == 1.0);
  CHECK(ts.sign(1, 0.2) == 1.0);
  CHECK(ts.sign(1, 0.7) == -1.0);
  CHECK(ts.boundaries(1.6) == std::vector<double>{0.5, 1.0, 1.5});

  auto yy = [&](double t) {
    CMat h = CMat::Zero(16, 16);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        h += ts.sign(i, t) * ts.sign(j, t) * spinops::pauli_string({{i, Axis::y}, {j, Axis::y}}, l).to_dense();
    return h;
  };
  const CMat hp = yy(0.1), hm = yy(0.6);
  CMat avg = CMat::Zero(16, 16);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      avg += effective::sublattice_factor(long(i), long(j)) * spinops::pauli_string({{i, Axis::y}, {j, Axis::y}}, l).to_dense();
  CHECK((0.5 * (hp + hm) - avg).norm() < 1e-12);
  const double tau = 1e-3;
  const CMat prod = (CMat(cplx(0, -tau / 2) * hm)).exp() * (CMat(cplx(0, -tau / 2) * hp)).exp();
  const CMat ref = (CMat(cplx(0, -tau) * avg)).exp();
  CHECK((prod - ref).norm() < 10 * tau * tau);
}
