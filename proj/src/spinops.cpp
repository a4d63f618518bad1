#include "hds/spinops.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace hds::spinops {

void TensorLayout::validate() const {
  if (n_spins > 62) throw std::invalid_argument("too many spins for a 64-bit basis index");
  std::vector<bool> used(n_spins, false);
  for (auto [a, b] : pairing) {
    if (a >= n_spins || b >= n_spins) throw std::invalid_argument("pairing index out of range");
    if (a == b || used[a] || used[b]) throw std::invalid_argument("pairing covers a site twice");
    used[a] = used[b] = true;
  }
}

OperatorMatrix OperatorMatrix::wrap(CMat m, bool hermitian) {
  OperatorMatrix op;
  op.dim_ = static_cast<std::size_t>(m.rows());
  op.data_ = std::move(m);
  op.hermitian_ = hermitian;
  return op;
}

OperatorMatrix OperatorMatrix::wrap(SpMat m, bool hermitian) {
  OperatorMatrix op;
  op.dim_ = static_cast<std::size_t>(m.rows());
  m.makeCompressed();
  op.data_ = std::move(m);
  op.hermitian_ = hermitian;
  return op;
}

OperatorMatrix OperatorMatrix::from_dense(const CMat& m, bool hermitian) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("operator must be square");
  OperatorMatrix op = static_cast<std::size_t>(m.rows()) < kDenseLimit
                          ? wrap(CMat(m), hermitian)
                          : wrap(SpMat(m.sparseView(0.0, 0.0)), hermitian);
  if (hermitian && op.hermiticity_error() >= 1e-12)
    throw std::invalid_argument("operator flagged hermitian is not hermitian");
  return op;
}

OperatorMatrix OperatorMatrix::from_sparse(const SpMat& m, bool hermitian) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("operator must be square");
  OperatorMatrix op = static_cast<std::size_t>(m.rows()) < kDenseLimit ? wrap(CMat(m), hermitian)
                                                                        : wrap(SpMat(m), hermitian);
  if (hermitian && op.hermiticity_error() >= 1e-12)
    throw std::invalid_argument("operator flagged hermitian is not hermitian");
  return op;
}

OperatorMatrix OperatorMatrix::identity(std::size_t dim) {
  if (dim < kDenseLimit) return wrap(CMat(CMat::Identity(dim, dim)), true);
  SpMat m(dim, dim);
  m.setIdentity();
  return wrap(std::move(m), true);
}

OperatorMatrix OperatorMatrix::zero(std::size_t dim) {
  if (dim < kDenseLimit) return wrap(CMat(CMat::Zero(dim, dim)), true);
  return wrap(SpMat(dim, dim), true);
}

const CMat& OperatorMatrix::dense() const {
  if (is_sparse()) throw std::logic_error("operator is stored sparse");
  return std::get<CMat>(data_);
}

const SpMat& OperatorMatrix::sparse() const {
  if (!is_sparse()) throw std::logic_error("operator is stored dense");
  return std::get<SpMat>(data_);
}

CMat OperatorMatrix::to_dense() const {
  return is_sparse() ? CMat(std::get<SpMat>(data_)) : std::get<CMat>(data_);
}

SpMat OperatorMatrix::to_sparse() const {
  return is_sparse() ? std::get<SpMat>(data_) : SpMat(std::get<CMat>(data_).sparseView(0.0, 0.0));
}

CVec OperatorMatrix::apply(const CVec& v) const {
  if (static_cast<std::size_t>(v.size()) != dim_) throw std::invalid_argument("dimension mismatch");
  return std::visit([&](const auto& m) -> CVec { return m * v; }, data_);
}

cplx OperatorMatrix::expectation(const CVec& v) const { return v.dot(apply(v)); }

double OperatorMatrix::hermiticity_error() const {
  if (is_sparse()) {
    const SpMat& m = std::get<SpMat>(data_);
    SpMat diff = m - SpMat(m.adjoint());
    double err = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SpMat::InnerIterator it(diff, k); it; ++it) err = std::max(err, std::abs(it.value()));
    return err;
  }
  const CMat& m = std::get<CMat>(data_);
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

OperatorMatrix OperatorMatrix::adjoint() const {
  if (is_sparse()) return wrap(SpMat(std::get<SpMat>(data_).adjoint()), hermitian_);
  return wrap(CMat(std::get<CMat>(data_).adjoint()), hermitian_);
}

namespace {

void check_same_dim(const OperatorMatrix& a, const OperatorMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
}

}  // namespace

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
  check_same_dim(a, b);
  bool h = a.hermitian() && b.hermitian();
  if (a.is_sparse()) return OperatorMatrix::wrap(SpMat(a.sparse() + b.to_sparse()), h);
  return OperatorMatrix::wrap(CMat(a.dense() + b.to_dense()), h);
}

OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
  check_same_dim(a, b);
  bool h = a.hermitian() && b.hermitian();
  if (a.is_sparse()) return OperatorMatrix::wrap(SpMat(a.sparse() - b.to_sparse()), h);
  return OperatorMatrix::wrap(CMat(a.dense() - b.to_dense()), h);
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
  check_same_dim(a, b);
  if (a.is_sparse()) return OperatorMatrix::wrap(SpMat(a.sparse() * b.to_sparse()), false);
  return OperatorMatrix::wrap(CMat(a.dense() * b.to_dense()), false);
}

OperatorMatrix operator*(cplx s, const OperatorMatrix& a) {
  bool h = a.hermitian() && s.imag() == 0.0;
  if (a.is_sparse()) return OperatorMatrix::wrap(SpMat(s * a.sparse()), h);
  return OperatorMatrix::wrap(CMat(s * a.dense()), h);
}

OperatorMatrix operator*(double s, const OperatorMatrix& a) { return cplx(s, 0.0) * a; }

CMat identity2() { return CMat::Identity(2, 2); }

CMat pauli(Axis axis) {
  CMat m = CMat::Zero(2, 2);
  switch (axis) {
    case Axis::x:
      m(0, 1) = m(1, 0) = 1.0;
      break;
    case Axis::y:
      m(0, 1) = cplx(0.0, -1.0);
      m(1, 0) = cplx(0.0, 1.0);
      break;
    case Axis::z:
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
  }
  return m;
}

CMat sigma_plus() {
  CMat m = CMat::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

CMat sigma_minus() {
  CMat m = CMat::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

OperatorMatrix embed(const OperatorMatrix& op, std::size_t site, const TensorLayout& layout) {
  layout.validate();
  std::size_t local;
  if (site < layout.n_spins) {
    local = 2;
  } else if (site == layout.boson_site() && layout.boson_dim > 0) {
    local = layout.boson_dim;
  } else {
    throw std::out_of_range("invalid site index " + std::to_string(site));
  }
  if (op.dim() != local) throw std::invalid_argument("embedded operator has the wrong dimension");

  const std::size_t boson = layout.boson_dim > 0 ? layout.boson_dim : 1;
  std::size_t left, right;
  if (site < layout.n_spins) {
    left = std::size_t{1} << site;
    right = (std::size_t{1} << (layout.n_spins - 1 - site)) * boson;
  } else {
    left = layout.spin_dim();
    right = 1;
  }

  const SpMat small = op.to_sparse();
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(static_cast<std::size_t>(small.nonZeros()) * left * right);
  for (std::size_t l = 0; l < left; ++l)
    for (int r = 0; r < small.outerSize(); ++r)
      for (SpMat::InnerIterator it(small, r); it; ++it)
        for (std::size_t k = 0; k < right; ++k) {
          auto row = static_cast<int>((l * local + it.row()) * right + k);
          auto col = static_cast<int>((l * local + it.col()) * right + k);
          triplets.emplace_back(row, col, it.value());
        }
  const auto dim = static_cast<int>(layout.dim());
  SpMat full(dim, dim);
  full.setFromTriplets(triplets.begin(), triplets.end());
  return OperatorMatrix::from_sparse(full, op.hermitian());
}

OperatorMatrix pauli_string(const std::vector<std::pair<std::size_t, Axis>>& specs,
                            const TensorLayout& layout) {
  layout.validate();
  std::set<std::size_t> seen;
  for (auto [s, a] : specs) {
    if (s >= layout.n_spins) throw std::out_of_range("invalid site index " + std::to_string(s));
    if (!seen.insert(s).second) throw std::invalid_argument("repeated site in Pauli string");
  }
  PauliSum sum(layout.n_spins);
  sum.add(specs);
  const double one = 1.0;
  SpMat spin = sum.sparse(std::span<const double>(&one, 1));
  if (layout.boson_dim == 0) return OperatorMatrix::from_sparse(spin, true);
  const auto b = static_cast<int>(layout.boson_dim);
  SpMat full(spin.rows() * b, spin.cols() * b);
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (int r = 0; r < spin.outerSize(); ++r)
    for (SpMat::InnerIterator it(spin, r); it; ++it)
      for (int k = 0; k < b; ++k)
        triplets.emplace_back(static_cast<int>(it.row()) * b + k, static_cast<int>(it.col()) * b + k,
                              it.value());
  full.setFromTriplets(triplets.begin(), triplets.end());
  return OperatorMatrix::from_sparse(full, true);
}

OperatorMatrix ladder(Ladder kind, std::size_t boson_dim) {
  if (boson_dim < 2) throw std::invalid_argument("boson_dim must be at least 2");
  CMat m = CMat::Zero(boson_dim, boson_dim);
  for (std::size_t n = 1; n < boson_dim; ++n) {
    if (kind == Ladder::raise)
      m(n, n - 1) = std::sqrt(static_cast<double>(n));
    else
      m(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  return OperatorMatrix::from_dense(m, false);
}

PauliWord make_word(const std::vector<std::pair<std::size_t, Axis>>& specs, std::size_t n_spins) {
  PauliWord w;
  for (auto [s, a] : specs) {
    if (s >= n_spins) throw std::out_of_range("invalid site index " + std::to_string(s));
    const std::uint64_t bit = std::uint64_t{1} << (n_spins - 1 - s);
    if ((w.x | w.z) & bit) throw std::invalid_argument("repeated site in Pauli string");
    if (a != Axis::z) w.x |= bit;
    if (a != Axis::x) w.z |= bit;
  }
  return w;
}

}  // namespace hds::spinops
