#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace hds {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

}  // namespace hds

namespace hds::spinops {

// Operators on spaces of this dimension or larger are stored sparse.
inline constexpr std::size_t kDenseLimit = 256;

// Site-major ordering: site 0 is the leftmost Kronecker factor, the boson (if any) is last.
// A spin basis index uses bit (n_spins - 1 - s) for site s; bit value 0 is |up> (sigma_z = +1).
struct TensorLayout {
  std::size_t n_spins = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairing;
  std::size_t boson_dim = 0;

  std::size_t spin_dim() const { return std::size_t{1} << n_spins; }
  std::size_t dim() const { return spin_dim() * (boson_dim > 0 ? boson_dim : 1); }
  std::size_t boson_site() const { return n_spins; }
  void validate() const;
};

class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  // Representation follows the dimension: dense below kDenseLimit, sparse otherwise.
  static OperatorMatrix from_dense(const CMat& m, bool hermitian = false);
  static OperatorMatrix from_sparse(const SpMat& m, bool hermitian = false);
  static OperatorMatrix identity(std::size_t dim);
  static OperatorMatrix zero(std::size_t dim);

  std::size_t dim() const { return dim_; }
  bool is_sparse() const { return std::holds_alternative<SpMat>(data_); }
  bool hermitian() const { return hermitian_; }

  const CMat& dense() const;
  const SpMat& sparse() const;
  CMat to_dense() const;
  SpMat to_sparse() const;

  CVec apply(const CVec& v) const;
  cplx expectation(const CVec& v) const;
  double hermiticity_error() const;
  OperatorMatrix adjoint() const;

  friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);
  friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b);
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);
  friend OperatorMatrix operator*(cplx s, const OperatorMatrix& a);
  friend OperatorMatrix operator*(double s, const OperatorMatrix& a);

 private:
  static OperatorMatrix wrap(CMat m, bool hermitian);
  static OperatorMatrix wrap(SpMat m, bool hermitian);

  std::size_t dim_ = 0;
  std::variant<CMat, SpMat> data_;
  bool hermitian_ = false;
};

enum class Axis { x, y, z };
enum class Ladder { raise, lower };

CMat identity2();
CMat pauli(Axis axis);
CMat sigma_plus();   // |up><down|
CMat sigma_minus();  // |down><up|

OperatorMatrix embed(const OperatorMatrix& op, std::size_t site, const TensorLayout& layout);
OperatorMatrix pauli_string(const std::vector<std::pair<std::size_t, Axis>>& specs,
                            const TensorLayout& layout);
OperatorMatrix ladder(Ladder kind, std::size_t boson_dim);

// Pauli word as bit masks: x marks X or Y factors, z marks Z or Y factors.
// P|j> = i^{#Y} (-1)^{popcount(j & z)} |j ^ x>.
struct PauliWord {
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  bool operator==(const PauliWord&) const = default;
};

PauliWord make_word(const std::vector<std::pair<std::size_t, Axis>>& specs, std::size_t n_spins);

// Real-weighted sum of Pauli words on a spin-only space. Coefficients are supplied per
// evaluation so one structure serves every time step.
class PauliSum {
 public:
  explicit PauliSum(std::size_t n_spins);

  std::size_t add(const PauliWord& w);
  std::size_t add(const std::vector<std::pair<std::size_t, Axis>>& specs);

  std::size_t n_spins() const { return n_spins_; }
  std::size_t dim() const { return std::size_t{1} << n_spins_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<PauliWord>& words() const { return words_; }

  CMat dense(std::span<const double> coeffs) const;
  SpMat sparse(std::span<const double> coeffs) const;
  OperatorMatrix matrix(std::span<const double> coeffs) const;

  // Operator with fixed coefficients, laid out for fast matrix-vector products.
  class Frozen {
   public:
    void apply(const CVec& in, CVec& out) const;
    std::size_t dim() const { return static_cast<std::size_t>(diag_.size()); }

   private:
    friend class PauliSum;
    struct Term {
      std::uint64_t z;
      cplx c;
    };
    struct Group {
      std::uint64_t x;
      std::vector<Term> terms;
      bool uniform;  // every term has z == 0 after folding
    };
    Eigen::VectorXd diag_;
    std::vector<Group> groups_;
  };

  Frozen freeze(std::span<const double> coeffs) const;

 private:
  std::size_t n_spins_;
  std::vector<PauliWord> words_;
};

}  // namespace hds::spinops
