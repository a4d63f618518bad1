#include "hds/spinops.hpp"

#include <doctest.h>

#include <random>

using namespace hds;
using spinops::Axis;

namespace {

CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

spinops::TensorLayout spins(std::size_t n) {
  spinops::TensorLayout l;
  l.n_spins = n;
  return l;
}

}  // namespace

TEST_CASE("pauli algebra") {
  const CMat x = spinops::pauli(Axis::x), y = spinops::pauli(Axis::y), z = spinops::pauli(Axis::z);
  CHECK((x * y - cplx(0, 1) * z).norm() < 1e-15);
  CHECK((x * x - spinops::identity2()).norm() < 1e-15);
  CHECK((spinops::sigma_plus() - 0.5 * (x + cplx(0, 1) * y)).norm() < 1e-15);
  CHECK(z(0, 0).real() == 1.0);  // bit 0 is |up>
}

TEST_CASE("embedding matches an explicit Kronecker product") {
  const auto l = spins(3);
  const CMat z = spinops::pauli(Axis::z), x = spinops::pauli(Axis::x), I = spinops::identity2();
  const CMat ref = kron(kron(z, I), x);
  const auto op = spinops::pauli_string({{0, Axis::z}, {2, Axis::x}}, l);
  CHECK((op.to_dense() - ref).norm() < 1e-14);
  const auto e = spinops::embed(spinops::OperatorMatrix::from_dense(spinops::pauli(Axis::y)), 1, l);
  CHECK((e.to_dense() - kron(kron(I, spinops::pauli(Axis::y)), I)).norm() < 1e-14);
}

TEST_CASE("boson factor sits last") {
  spinops::TensorLayout l;
  l.n_spins = 1;
  l.boson_dim = 3;
  const auto a = spinops::ladder(spinops::Ladder::lower, 3);
  CHECK(a.to_dense()(1, 2).real() == doctest::Approx(std::sqrt(2.0)));
  const auto full = spinops::embed(a, l.boson_site(), l);
  CHECK((full.to_dense() - kron(spinops::identity2(), a.to_dense())).norm() < 1e-14);
}

TEST_CASE("sparse and dense representations agree") {
  const auto l = spins(8);
  const auto op = spinops::pauli_string({{1, Axis::x}, {6, Axis::y}}, l);
  CHECK(op.is_sparse());
  CVec v = CVec::Random(256);
  CHECK((op.apply(v) - op.to_dense() * v).norm() < 1e-12);
  CHECK(op.hermiticity_error() < 1e-15);
}

TEST_CASE("PauliSum frozen apply equals its matrix") {
  const std::size_t n = 7;
  spinops::PauliSum sum(n);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ax(0, 2);
  std::uniform_int_distribution<std::size_t> site(0, n - 1);
  std::vector<double> c;
  for (int k = 0; k < 40; ++k) {
    std::size_t s1 = site(rng), s2 = site(rng);
    if (s1 == s2) s2 = (s1 + 1) % n;
    sum.add({{s1, static_cast<Axis>(ax(rng))}, {s2, static_cast<Axis>(ax(rng))}});
    c.push_back(std::uniform_real_distribution<double>(-1, 1)(rng));
  }
  sum.add({{2, Axis::z}});
  c.push_back(0.7);
  const CMat m = sum.dense(c);
  CHECK((m - m.adjoint()).norm() < 1e-12);
  const auto f = sum.freeze(c);
  CVec in = CVec::Random(static_cast<Eigen::Index>(sum.dim())), out(in.size());
  f.apply(in, out);
  CHECK((out - m * in).norm() < 1e-12);
  CHECK((CMat(sum.sparse(c)) - m).norm() < 1e-12);
}

TEST_CASE("word masks follow the documented phase rule") {
  const auto w = spinops::make_word({{0, Axis::y}, {1, Axis::z}}, 2);
  CHECK(w.x == 2u);
  CHECK(w.z == 3u);
  CHECK_THROWS(spinops::make_word({{2, Axis::x}}, 2));
}
