#pragma once

#include "hds/spinops.hpp"

#include <cstddef>
#include <functional>

namespace hds::propagate {

using MatVec = std::function<void(const CVec& in, CVec& out)>;

struct KrylovStats {
  std::size_t matvecs = 0;
  std::size_t substeps = 0;
};

// psi <- exp(-i H dt) psi for Hermitian H given as a matrix-vector product.
// Lanczos projection; the step is split whenever the a-posteriori error estimate
// does not reach tol within max_dim basis vectors.
void krylov_expv(const MatVec& h, CVec& psi, double dt, double tol, KrylovStats* stats = nullptr,
                 std::size_t max_dim = 48);

}  // namespace hds::propagate
