#include "hds/effective.hpp"
#include "hds/model.hpp"

#include <doctest.h>

#include <numbers>

using namespace hds;
using spinops::Axis;
constexpr double kPi = std::numbers::pi;

TEST_CASE("dressed basis diagonalizes the tilted field") {
  for (double th : {0.0, 0.4, kPi / 2, 2.0}) {
    const auto [up, down] = model::dressed_basis(th);
    const CMat h = std::cos(th) * spinops::pauli(Axis::z) + std::sin(th) * spinops::pauli(Axis::x);
    CHECK((h * up - up).norm() < 1e-14);
    CHECK((h * down + down).norm() < 1e-14);
  }
  CHECK_THROWS(model::dressed_basis(-0.1));
}

TEST_CASE("hybrid pair vectors in the z basis") {
  const auto b = model::HybridEncoding::pair_basis();
  const double r = 1 / std::sqrt(2.0);
  CHECK(b[0](0) == doctest::Approx(r));
  CHECK(b[0](3) == doctest::Approx(-r));
  CHECK(b[1](1) == doctest::Approx(-r));
  CHECK(b[1](2) == doctest::Approx(r));
}

TEST_CASE("encoding is an isometry and projection inverts it") {
  const auto l = effective::chain_layout(3);
  const model::HybridEncoding enc(l);
  const CMat V = enc.isometry();
  CHECK((V.adjoint() * V - CMat::Identity(8, 8)).norm() < 1e-12);
  CVec psi = CVec::Random(8);
  psi.normalize();
  const CVec phys = enc.encode(psi);
  CHECK((enc.project(phys) - psi).norm() < 1e-12);
  CHECK(model::leakage(enc, phys) < 1e-12);
  CVec up = CVec::Zero(64);
  up[0] = 1.0;
  CHECK(model::leakage(enc, up) == doctest::Approx(1.0 - 0.125));
}

TEST_CASE("logical images of physical operators carry the documented signs") {
  // Four pairs so the checks span distant sites as well as neighbours.
  const auto l = effective::chain_layout(4);
  const model::HybridEncoding enc(l);
  const CMat V = enc.isometry();
  spinops::TensorLayout logical;
  logical.n_spins = 4;
  auto lx = [&](std::size_t k, std::size_t m) { return spinops::pauli_string({{k, Axis::x}, {m, Axis::x}}, logical).to_dense(); };
  auto phys = [&](std::size_t i, std::size_t j) { return spinops::pauli_string({{i, Axis::x}, {j, Axis::x}}, l).to_dense(); };
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t m = k + 1; m < 4; ++m) {
      CHECK((V.adjoint() * phys(2 * k, 2 * m) * V - lx(k, m)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((V.adjoint() * phys(2 * k, 2 * m + 1) * V + lx(k, m)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((V.adjoint() * phys(2 * k + 1, 2 * m + 1) * V - lx(k, m)).cwiseAbs().maxCoeff() < 1e-12);
    }
  const CMat zz = spinops::pauli_string({{2, Axis::z}, {3, Axis::z}}, l).to_dense();
  const CMat z1 = spinops::pauli_string({{1, Axis::z}}, logical).to_dense();
  CHECK((V.adjoint() * zz * V - z1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("protection drives vanish on the hybrid subspace") {
  const auto l = effective::chain_layout(2);
  const model::HybridEncoding enc(l);
  const CMat V = enc.isometry();
  CMat hp = CMat::Zero(16, 16);
  for (std::size_t s = 0; s < 4; ++s) hp += spinops::pauli_string({{s, Axis::x}}, l).to_dense();
  CHECK((hp * V).norm() < 1e-12);
}

TEST_CASE("model validation catches inconsistent systems") {
  model::SystemSpec s;
  s.layout.n_spins = 2;
  s.frame = model::Frame::lab;
  CHECK_THROWS(s.validate());
  s.frame = model::Frame::second_interaction;
  CHECK_THROWS(s.validate());
  s.frame = model::Frame::first_interaction;
  s.noise.dephasing.assign(3, {1.0, 1.0});
  CHECK_THROWS(s.validate());
}

TEST_CASE("first-frame Hamiltonian terms") {
  model::SystemSpec s;
  s.layout.n_spins = 2;
  s.first_drive.assign(2, {3.0, 0.5, model::Fluctuation::none});
  s.coupling = Eigen::MatrixXd::Zero(2, 2);
  s.coupling(0, 1) = s.coupling(1, 0) = 0.8;
  model::PauliModel m(s);
  std::vector<double> c;
  m.coefficients(nullptr, 0.0, 0.0, c);
  const CMat h = m.sum().dense(c);
  const auto& l = s.layout;
  const CMat ref = 1.5 * (spinops::pauli_string({{0, Axis::x}}, l).to_dense() + spinops::pauli_string({{1, Axis::x}}, l).to_dense()) +
                   0.25 * (spinops::pauli_string({{0, Axis::z}}, l).to_dense() + spinops::pauli_string({{1, Axis::z}}, l).to_dense()) +
                   0.2 * spinops::pauli_string({{0, Axis::z}, {1, Axis::z}}, l).to_dense();
  CHECK((h - ref).norm() < 1e-12);
}

TEST_CASE("shared amplitude fluctuation scales every drive") {
  model::SystemSpec s;
  s.layout.n_spins = 1;
  s.first_drive = {{2.0, 0.0, model::Fluctuation::shared_amp_phase}};
  s.noise.drive_amp = {0.1, 5.0};
  s.noise.drive_phase = {0.2, 5.0};
  const auto r = model::build_realization(s, noise::TimeGrid{0.5, 4}, 3);
  model::PauliModel m(s);
  std::vector<double> c;
  m.coefficients(&r, 1.0, 1.0, c);
  const double amp = 1.0 + r.drive_amp[2] / 2.0;
  CHECK(c[0] == doctest::Approx(amp * std::cos(r.drive_phase[2])));
  CHECK(c[1] == doctest::Approx(amp * std::sin(r.drive_phase[2])));
}
