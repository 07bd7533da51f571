// Generator of dilations in the x variable, its spectral weights and
// half-line projectors, and iterated commutators with the model operator.

#pragma once

#include <vector>

#include "dlap/linalg.hpp"
#include "dlap/models.hpp"

namespace dlap {

// A = A_x (x) I_y. The banded matrix is kept sparse for products; spectral
// functions are assembled from the eigendecomposition of the 1D factor.
struct ConjugateOperator {
  CSparseMatrix A;
  Mat ax;         // 1D factor, nx x nx
  EigDecomp eig;  // of the full A, ascending
  int ny = 1;

  Eigen::Index size() const { return A.rows(); }
  // f(A) as a dense matrix.
  Mat function(const RealFunction& f) const;
  // f(A_x), the 1D factor of f(A).
  Mat factor(const RealFunction& f) const;
  // <A>^{-delta}
  Mat weight(double delta) const;
  // 1_{[0,inf)}(A) for sign > 0, 1_{(-inf,0)}(A) otherwise.
  Mat halfline_projector(int sign) const;
};

// Applies f (x) I_ny to v without forming the Kronecker product.
Vec apply_x_factor(const Mat& f, int ny, const Vec& v);

ConjugateOperator build_dilation_generator(const DissipativeModel& model);

// Antisymmetric centered difference in symmetrized coordinates (1D factor).
Mat centered_difference(const RVec& weights);

struct CommutatorChain {
  // B[0] = [H0, iA]; B[n] = ad^n_{iA}(H0 - i Theta) for n >= 1.
  std::vector<CSparseMatrix> B;
  // |(H0+1)^{-1/2} B[n] (H0+1)^{-1/2}|
  std::vector<double> norms_KKstar;
};

inline constexpr int kMaxChainOrder = 5;

// Algebraic chain B[n+1] = i (B[n] A - A B[n]) of the discrete matrices.
CommutatorChain ad_chain(const DissipativeModel& model, const ConjugateOperator& conj, int N);

// Chain of the continuum forms restricted to the grid:
// B[0] = 2 Hx, B[n] = 2^n Hx - i Theta[(-x d/dx)^n a].
CommutatorChain form_chain(const DissipativeModel& model, int N);

// Model, conjugate operator and cached spectral data of H0.
struct Setup {
  DissipativeModel model;
  ConjugateOperator conj;
  EigDecomp h0;
  Mat k_minus;  // (H0+1)^{-1/2}
  Mat k_plus;   // (H0+1)^{1/2}

  explicit Setup(DissipativeModel m);
  Eigen::Index size() const { return model.size(); }
  // |(H0+1)^{-1/2} X (H0+1)^{-1/2}|
  double kkstar_norm(const CSparseMatrix& x) const;
  double kkstar_norm(const LinearMap& x, const LinearMap& x_adj) const;
  // |(H0+1)^{1/2} X (H0+1)^{1/2}|
  double kstark_norm(const LinearMap& x, const LinearMap& x_adj) const;
};

void fill_kkstar_norms(const Setup& setup, CommutatorChain& chain);

}  // namespace dlap
