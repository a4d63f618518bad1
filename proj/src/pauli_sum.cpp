#include "hds/spinops.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <stdexcept>

namespace hds::spinops {

namespace {

cplx i_power(int k) {
  switch (k & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

double parity_sign(std::uint64_t v) { return (std::popcount(v) & 1) ? -1.0 : 1.0; }

void check_coeffs(std::span<const double> coeffs, std::size_t n) {
  if (coeffs.size() != n) throw std::invalid_argument("coefficient count does not match Pauli sum");
}

}  // namespace

PauliSum::PauliSum(std::size_t n_spins) : n_spins_(n_spins) {
  if (n_spins > 30) throw std::invalid_argument("Pauli sum limited to 30 spins");
}

std::size_t PauliSum::add(const PauliWord& w) {
  words_.push_back(w);
  return words_.size() - 1;
}

std::size_t PauliSum::add(const std::vector<std::pair<std::size_t, Axis>>& specs) {
  return add(make_word(specs, n_spins_));
}

CMat PauliSum::dense(std::span<const double> coeffs) const {
  check_coeffs(coeffs, words_.size());
  const std::size_t n = dim();
  CMat m = CMat::Zero(n, n);
  for (std::size_t k = 0; k < words_.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto [x, z] = words_[k];
    const cplx c = coeffs[k] * i_power(std::popcount(x & z));
    for (std::size_t j = 0; j < n; ++j) m(j ^ x, j) += c * parity_sign(j & z);
  }
  return m;
}

SpMat PauliSum::sparse(std::span<const double> coeffs) const {
  check_coeffs(coeffs, words_.size());
  const std::size_t n = dim();
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (std::size_t k = 0; k < words_.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto [x, z] = words_[k];
    const cplx c = coeffs[k] * i_power(std::popcount(x & z));
    for (std::size_t j = 0; j < n; ++j)
      triplets.emplace_back(static_cast<int>(j ^ x), static_cast<int>(j), c * parity_sign(j & z));
  }
  SpMat m(static_cast<int>(n), static_cast<int>(n));
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0, 0.0);
  return m;
}

OperatorMatrix PauliSum::matrix(std::span<const double> coeffs) const {
  if (dim() < kDenseLimit) return OperatorMatrix::from_dense(dense(coeffs), true);
  return OperatorMatrix::from_sparse(sparse(coeffs), true);
}

PauliSum::Frozen PauliSum::freeze(std::span<const double> coeffs) const {
  check_coeffs(coeffs, words_.size());
  const std::size_t n = dim();
  Frozen f;
  f.diag_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  // Diagonal words are merged by z mask before touching the full vector.
  std::map<std::uint64_t, double> diagonal;
  std::map<std::uint64_t, std::map<std::uint64_t, cplx>> flips;
  for (std::size_t k = 0; k < words_.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto [x, z] = words_[k];
    if (x == 0) {
      diagonal[z] += coeffs[k];
      continue;
    }
    // Evaluate the sign on the output index: (-1)^{|(i^x)&z|} = (-1)^{|x&z|} (-1)^{|i&z|}.
    flips[x][z] += coeffs[k] * i_power(std::popcount(x & z)) * parity_sign(x & z);
  }
  for (auto [z, c] : diagonal) {
    if (c == 0.0) continue;
    if (z == 0) {
      f.diag_.array() += c;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) f.diag_[static_cast<Eigen::Index>(i)] += c * parity_sign(i & z);
  }
  for (auto& [x, terms] : flips) {
    Frozen::Group g{x, {}, true};
    for (auto [z, c] : terms) {
      if (c == cplx(0.0, 0.0)) continue;
      g.terms.push_back({z, c});
      if (z != 0) g.uniform = false;
    }
    if (!g.terms.empty()) f.groups_.push_back(std::move(g));
  }
  return f;
}

void PauliSum::Frozen::apply(const CVec& in, CVec& out) const {
  const std::size_t n = dim();
  if (static_cast<std::size_t>(in.size()) != n) throw std::invalid_argument("dimension mismatch");
  out.resize(in.size());
  const cplx* src = in.data();
  cplx* dst = out.data();
  const double* d = diag_.data();

  // One pass over output blocks small enough to stay in L1 while every group adds into them.
  const std::size_t blk = std::min<std::size_t>(64, n);
  for (std::size_t base = 0; base < n; base += blk) {
    cplx* o = dst + base;
    for (std::size_t k = 0; k < blk; ++k) o[k] = d[base + k] * src[base + k];
    for (const Group& g : groups_) {
      const std::uint64_t lo = g.x & (blk - 1);
      const cplx* s = src + (base ^ (g.x & ~std::uint64_t(blk - 1)));
      if (g.uniform) {
        const cplx c = g.terms.front().c;
        if (c.imag() == 0.0) {
          const double r = c.real();
          for (std::size_t k = 0; k < blk; ++k) o[k] += r * s[k ^ lo];
        } else {
          for (std::size_t k = 0; k < blk; ++k) o[k] += c * s[k ^ lo];
        }
      } else if (g.terms.size() == 2 && g.terms[0].z == 0) {
        // X plus Y on the same sites: coefficient takes one of two values.
        const std::uint64_t z = g.terms[1].z;
        const cplx plus = g.terms[0].c + g.terms[1].c;
        const cplx minus = g.terms[0].c - g.terms[1].c;
        for (std::size_t k = 0; k < blk; ++k)
          o[k] += ((std::popcount((base + k) & z) & 1) ? minus : plus) * s[k ^ lo];
      } else {
        for (std::size_t k = 0; k < blk; ++k) {
          cplx c = 0.0;
          for (const Term& t : g.terms) c += (std::popcount((base + k) & t.z) & 1) ? -t.c : t.c;
          o[k] += c * s[k ^ lo];
        }
      }
    }
  }
}

}  // namespace hds::spinops
