#include "hds/observables.hpp"

#include <doctest.h>

#include <cmath>

using namespace hds;

TEST_CASE("threshold") { CHECK(observables::kCoherenceThreshold == doctest::Approx(0.6839397)); }

TEST_CASE("concurrence of cos|01> + e^{i chi} sin|10>") {
  for (double phi : {0.0, 0.3, std::acos(-1.0) / 4, 1.2}) {
    CVec psi = CVec::Zero(4);
    psi[1] = std::cos(phi);
    psi[2] = std::exp(cplx(0, 0.7)) * std::sin(phi);
    CHECK(observables::concurrence(psi) == doctest::Approx(std::abs(std::sin(2 * phi))).epsilon(1e-7));
  }
  CHECK(observables::concurrence(CMat(CMat::Identity(4, 4) / 4.0)) == doctest::Approx(0.0));
  CHECK_THROWS(observables::concurrence(CMat(CMat::Identity(4, 4))));
}

TEST_CASE("coherence time crossing and lower bound") {
  observables::CoherenceCurve c{{0, 1, 2, 3}, {1.0, 0.9, 0.6, 0.55}, {0, 0, 0, 0}};
  const auto t = observables::coherence_time(c);
  CHECK(!t.lower_bound);
  CHECK(t.value == doctest::Approx(1 + (0.9 - observables::kCoherenceThreshold) / 0.3));
  c.f_mean = {1.0, 0.95, 0.9, 0.85};
  const auto lb = observables::coherence_time(c);
  CHECK(lb.lower_bound);
  CHECK(lb.value == 3.0);
}

TEST_CASE("structure factor of a product state and a cat state") {
  const std::size_t n = 5;
  CVec down = CVec::Zero(32);
  down[31] = 1.0;
  CHECK(observables::structure_factor(observables::xx_correlators(down, n), 0.0).real() == doctest::Approx(0.0));
  CVec plus = CVec::Constant(32, 1 / std::sqrt(32.0));
  CHECK(observables::structure_factor(observables::xx_correlators(plus, n), 0.0).real() == doctest::Approx(10.0));
  Eigen::MatrixXd C = Eigen::MatrixXd::Ones(3, 3);
  C(0, 2) = std::nan("");
  CHECK_THROWS(observables::structure_factor(C, 0.0));
}

TEST_CASE("fidelity") {
  CVec a(2), b(2);
  a << 1, 0;
  b << 1 / std::sqrt(2.0), cplx(0, 1 / std::sqrt(2.0));
  CHECK(observables::fidelity(a, b) == doctest::Approx(0.5));
  CHECK(observables::fidelity(a, CMat(b * b.adjoint())) == doctest::Approx(0.5));
}
