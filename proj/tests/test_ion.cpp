#include "hds/ion.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace hds;
constexpr double kTwoPi = 2 * std::numbers::pi;

namespace {

ion::IonParams caption(double omega_z_khz, double delta_m_khz) {
  ion::IonParams p;
  p.j_raman = kTwoPi * 0.1;
  p.eta = 0.05;
  p.nu = kTwoPi * 10;
  p.delta = kTwoPi * 10.1;
  p.omega_c = kTwoPi * 2;
  p.omega_z.assign(2, kTwoPi * omega_z_khz * 1e-3);
  p.delta_m.assign(2, kTwoPi * delta_m_khz * 1e-3);
  return p;
}

}  // namespace

TEST_CASE("effective exchange and mixing angles") {
  const auto p = caption(4.99, 2.88);
  CHECK(p.j_eff() == doctest::Approx(kTwoPi * 2.5e-4).epsilon(1e-12));
  CHECK(std::abs(p.theta(0) - std::numbers::pi / 3) < 2e-3);
  CHECK(caption(0, 2000).theta(1) == 0.0);
  CHECK(caption(5, 0).theta(0) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("carrier light shift") {
  const auto p = caption(5, 0);
  const double expect = -p.j_raman * p.j_raman * p.omega_c / (2 * (p.delta * p.delta - p.omega_c * p.omega_c));
  CHECK(p.light_shift() == doctest::Approx(expect));
  CHECK(p.light_shift() < 0.0);
}

TEST_CASE("generators are hermitian") {
  const auto p = caption(4.98, 4.99);
  const ion::IonModel m(p);
  for (double t : {0.0, 0.37, 12.5}) {
    const CMat h = m.total(t);
    CHECK((h - h.adjoint()).norm() < 1e-12 * h.norm());
  }
  CHECK(ion::build_target_xxz(p).hermiticity_error() < 1e-14);
  const CMat u = ion::label_rotation(p);
  CHECK((u * u.adjoint() - CMat::Identity(u.rows(), u.cols())).norm() < 1e-13);
}

TEST_CASE("label states are orthonormal") {
  auto p = caption(4.99, 2.88);
  for (auto labels : {ion::IonParams::Labels::literal, ion::IonParams::Labels::energy_axis}) {
    p.labels = labels;
    const auto [u, d] = ion::label_states(p, 0);
    CHECK(u.norm() == doctest::Approx(1.0));
    CHECK(std::abs(u.dot(d)) < 1e-14);
  }
}

TEST_CASE("comparison frame is unitary and invertible") {
  const auto p = caption(4.99, 2.88);
  const ion::IonModel m(p);
  CVec psi = CVec::Random(static_cast<Eigen::Index>(m.dim()));
  psi.normalize();
  const CVec f = ion::to_comparison_frame(m, 3.3, psi);
  CHECK(f.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((ion::to_comparison_frame(m, 3.3, f, true) - psi).norm() < 1e-12);
}

TEST_CASE("trimming the light shift tightens the theta = pi/2 comparison") {
  auto p = caption(5, 0);
  const auto trimmed = ion::compare_xxz(p, 250.0, 0.01, 500);
  p.trim_light_shift = false;
  const auto raw = ion::compare_xxz(p, 250.0, 0.01, 500);
  CHECK(trimmed.max_deviation < raw.max_deviation);
  CHECK(trimmed.max_norm_drift < 1e-8);
}

TEST_CASE("invalid ion parameters") {
  auto p = caption(5, 0);
  p.omega_z.pop_back();
  CHECK_THROWS(p.validate());
  p = caption(5, 0);
  p.delta = p.nu;
  CHECK_THROWS(p.validate());
}
