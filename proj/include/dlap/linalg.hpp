// Complex linear-algebra kernel: sparse matrices, factor-and-solve handles,
// Hermitian eigendecompositions, spectral matrix functions, operator norms
// by power iteration, and the factored-perturbation inverse.

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dlap {

using cd = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cd, Eigen::RowMajor>;

inline constexpr cd kI{0.0, 1.0};
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

enum class ErrorKind {
  SingularMatrix,
  NotHermitian,
  GammaSingular,
  NegativeAbsorption,
  NoOriginNode,
  NonPhysicalZ,
  OrderTooLarge,
  BadNesting,
  TooFewSamples,
  NotInvertible,
  TailNotConverged,
  ParameterOutOfRange,
  InvalidArgument,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Square or rectangular complex sparse matrix in compressed row-major form.
class CSparseMatrix {
 public:
  struct Triplet {
    Eigen::Index row;
    Eigen::Index col;
    cd value;
  };

  CSparseMatrix() = default;
  CSparseMatrix(Eigen::Index rows, Eigen::Index cols);
  explicit CSparseMatrix(SpMat m, bool hermitian = false);

  // Duplicate (row, col) pairs are summed.
  static CSparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols,
                                     const std::vector<Triplet>& entries,
                                     bool hermitian = false);
  static CSparseMatrix identity(Eigen::Index n);
  static CSparseMatrix diagonal(const Vec& d);
  static CSparseMatrix from_dense(const Mat& m, double drop_tol = 0.0);

  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }
  Eigen::Index nnz() const { return m_.nonZeros(); }
  bool hermitian() const { return hermitian_; }

  const SpMat& matrix() const { return m_; }
  Mat dense() const { return Mat(m_); }
  std::vector<Triplet> triplets() const;

  // Removes explicitly stored zeros.
  CSparseMatrix canonicalized() const;
  CSparseMatrix adjoint() const;
  double max_abs() const;
  // max|M - M*| over the stored pattern.
  double hermitian_defect() const;
  // Sets the flag after verifying the entrywise tolerance; throws NotHermitian.
  CSparseMatrix as_hermitian(double rel_tol = 1e-12) const;

  Vec apply(const Vec& v) const { return m_ * v; }
  Vec apply_adjoint(const Vec& v) const { return m_.adjoint() * v; }

  friend CSparseMatrix operator+(const CSparseMatrix& a, const CSparseMatrix& b);
  friend CSparseMatrix operator-(const CSparseMatrix& a, const CSparseMatrix& b);
  friend CSparseMatrix operator*(cd s, const CSparseMatrix& a);
  friend CSparseMatrix operator*(const CSparseMatrix& a, const CSparseMatrix& b);

 private:
  SpMat m_;
  bool hermitian_ = false;
};

// Plain-text triplet format: header `n_rows n_cols nnz`, then `row col re im`.
void dump_matrix(std::ostream& os, const CSparseMatrix& m);
CSparseMatrix restore_matrix(std::istream& is);

struct EigDecomp {
  RVec values;   // ascending
  Mat vectors;   // columns orthonormal

  Eigen::Index size() const { return values.size(); }
  Mat reconstruct() const;
};

double hermitian_defect(const Mat& m);
EigDecomp hermitian_eig(const Mat& m, double rel_tol = 1e-12);

using RealFunction = std::function<double(double)>;

Mat matrix_function(const EigDecomp& e, const RealFunction& f);

// Indicator of [lo, hi) with a relative tolerance for boundary ties.
RealFunction interval_indicator(double lo, double hi, double rel_tol = 1e-12);

// Opaque factorization supporting repeated solves with M and with M*.
class SolveHandle {
 public:
  class Impl {
   public:
    virtual ~Impl() = default;
    virtual Eigen::Index size() const = 0;
    virtual Vec solve(const Vec& b) const = 0;
    virtual Vec solve_adjoint(const Vec& b) const = 0;
  };

  SolveHandle() = default;
  explicit SolveHandle(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  bool valid() const { return static_cast<bool>(impl_); }
  Eigen::Index size() const { return impl_->size(); }
  Vec solve(const Vec& b) const { return impl_->solve(b); }
  Vec solve_adjoint(const Vec& b) const { return impl_->solve_adjoint(b); }
  Mat solve(const Mat& b) const;
  Mat solve_adjoint(const Mat& b) const;

 private:
  std::shared_ptr<const Impl> impl_;
};

// Sparse LU with a COLAMD ordering. Throws SingularMatrix.
SolveHandle factorize(const CSparseMatrix& m);
// Dense LU with partial pivoting. Throws SingularMatrix.
SolveHandle factorize(const Mat& m);

Vec sparse_solve(const CSparseMatrix& m, const Vec& b);

struct OpNormResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  // |<Tu,v> - <u,T*v>| / (|T u||v|) on a random pair.
  double adjoint_defect = 0.0;
};

using LinearMap = std::function<Vec(const Vec&)>;

// Largest singular value by power iteration on T*T from a seeded start vector.
OpNormResult weighted_op_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                              Eigen::Index n, double tol = 1e-10, int max_iter = 2000,
                              std::uint64_t seed = kDefaultSeed);

double op_norm(const Mat& m, double tol = 1e-12, int max_iter = 5000);
double op_norm(const CSparseMatrix& m, double tol = 1e-12, int max_iter = 5000);

// Largest eigenvalue of a Hermitian positive semidefinite map.
OpNormResult psd_max_eigenvalue(const LinearMap& apply, Eigen::Index n, double tol = 1e-10,
                                int max_iter = 2000, std::uint64_t seed = kDefaultSeed);

// Largest singular value by Lanczos on T*T with full reorthogonalization.
// Robust when the top of the spectrum is clustered, where power iteration stalls.
OpNormResult lanczos_op_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                             Eigen::Index n, double tol = 1e-10, int max_steps = 300,
                             std::uint64_t seed = kDefaultSeed);

struct FactoredInverse {
  SolveHandle handle;
  double contraction = 0.0;   // |P2 T^{-1} P1|
  bool hypothesis_ok = true;  // contraction < 1
};

// Inverse of T + P1 P2 as T^{-1} - T^{-1} P1 G^{-1} P2 T^{-1}, G = 1 + P2 T^{-1} P1.
FactoredInverse factored_inverse(const SolveHandle& t_solve, const Mat& p1, const Mat& p2);
FactoredInverse factored_inverse(const SolveHandle& t_solve, const CSparseMatrix& p1,
                                 const CSparseMatrix& p2);

double max_abs(const Mat& m);

// Runs fn(0..count-1) on up to `threads` workers; results must be written by index.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace dlap
