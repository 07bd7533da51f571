#include "dlap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <Eigen/SparseLU>

#include "dlap/rng.hpp"

namespace dlap {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::GammaSingular: return "GammaSingular";
    case ErrorKind::NegativeAbsorption: return "NegativeAbsorption";
    case ErrorKind::NoOriginNode: return "NoOriginNode";
    case ErrorKind::NonPhysicalZ: return "NonPhysicalZ";
    case ErrorKind::OrderTooLarge: return "OrderTooLarge";
    case ErrorKind::BadNesting: return "BadNesting";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::NotInvertible: return "NotInvertible";
    case ErrorKind::TailNotConverged: return "TailNotConverged";
    case ErrorKind::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

// ---------------------------------------------------------------------------
// CSparseMatrix

CSparseMatrix::CSparseMatrix(Eigen::Index rows, Eigen::Index cols) : m_(rows, cols) {}

CSparseMatrix::CSparseMatrix(SpMat m, bool hermitian) : m_(std::move(m)), hermitian_(hermitian) {
  m_.makeCompressed();
}

CSparseMatrix CSparseMatrix::from_triplets(Eigen::Index rows, Eigen::Index cols,
                                           const std::vector<Triplet>& entries,
                                           bool hermitian) {
  std::vector<Eigen::Triplet<cd>> t;
  t.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      std::ostringstream msg;
      msg << "triplet (" << e.row << ", " << e.col << ") outside " << rows << "x" << cols;
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
    t.emplace_back(e.row, e.col, e.value);
  }
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  CSparseMatrix out(std::move(m));
  return hermitian ? out.as_hermitian() : out;
}

CSparseMatrix CSparseMatrix::identity(Eigen::Index n) {
  SpMat m(n, n);
  m.setIdentity();
  return CSparseMatrix(std::move(m), true);
}

CSparseMatrix CSparseMatrix::diagonal(const Vec& d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  bool real = true;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    t.push_back({i, i, d[i]});
    real = real && d[i].imag() == 0.0;
  }
  auto out = from_triplets(d.size(), d.size(), t);
  out.hermitian_ = real;
  return out;
}

CSparseMatrix CSparseMatrix::from_dense(const Mat& m, double drop_tol) {
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > drop_tol) t.push_back({i, j, m(i, j)});
  return from_triplets(m.rows(), m.cols(), t);
}

std::vector<CSparseMatrix::Triplet> CSparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(m_.nonZeros()));
  for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
    for (SpMat::InnerIterator it(m_, r); it; ++it) out.push_back({it.row(), it.col(), it.value()});
  return out;
}

CSparseMatrix CSparseMatrix::canonicalized() const {
  SpMat m = m_;
  m.prune([](const Eigen::Index&, const Eigen::Index&, const cd& v) { return v != cd(0.0); });
  return CSparseMatrix(std::move(m), hermitian_);
}

CSparseMatrix CSparseMatrix::adjoint() const {
  SpMat a = m_.adjoint();
  return CSparseMatrix(std::move(a), hermitian_);
}

double CSparseMatrix::max_abs() const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < m_.nonZeros(); ++k) m = std::max(m, std::abs(m_.valuePtr()[k]));
  return m;
}

double CSparseMatrix::hermitian_defect() const {
  if (rows() != cols()) return std::numeric_limits<double>::infinity();
  SpMat d = m_ - SpMat(m_.adjoint());
  double m = 0.0;
  for (Eigen::Index k = 0; k < d.nonZeros(); ++k) m = std::max(m, std::abs(d.valuePtr()[k]));
  return m;
}

CSparseMatrix CSparseMatrix::as_hermitian(double rel_tol) const {
  const double scale = max_abs();
  const double defect = hermitian_defect();
  if (defect > rel_tol * scale) {
    std::ostringstream msg;
    msg << "sparse matrix defect " << defect << " exceeds " << rel_tol << " * " << scale;
    throw Error(ErrorKind::NotHermitian, msg.str());
  }
  CSparseMatrix out = *this;
  out.hermitian_ = true;
  return out;
}

CSparseMatrix operator+(const CSparseMatrix& a, const CSparseMatrix& b) {
  return CSparseMatrix(SpMat(a.m_ + b.m_), a.hermitian_ && b.hermitian_);
}

CSparseMatrix operator-(const CSparseMatrix& a, const CSparseMatrix& b) {
  return CSparseMatrix(SpMat(a.m_ - b.m_), a.hermitian_ && b.hermitian_);
}

CSparseMatrix operator*(cd s, const CSparseMatrix& a) {
  return CSparseMatrix(SpMat(s * a.m_), a.hermitian_ && s.imag() == 0.0);
}

CSparseMatrix operator*(const CSparseMatrix& a, const CSparseMatrix& b) {
  return CSparseMatrix(SpMat(a.m_ * b.m_));
}

void dump_matrix(std::ostream& os, const CSparseMatrix& m) {
  const auto t = m.triplets();
  os << m.rows() << ' ' << m.cols() << ' ' << t.size() << '\n';
  os << std::setprecision(17);
  for (const auto& e : t)
    os << e.row << ' ' << e.col << ' ' << e.value.real() << ' ' << e.value.imag() << '\n';
}

CSparseMatrix restore_matrix(std::istream& is) {
  Eigen::Index rows = 0, cols = 0;
  std::size_t nnz = 0;
  if (!(is >> rows >> cols >> nnz)) throw Error(ErrorKind::Io, "bad matrix header");
  std::vector<CSparseMatrix::Triplet> t;
  t.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    Eigen::Index r = 0, c = 0;
    double re = 0.0, im = 0.0;
    if (!(is >> r >> c >> re >> im)) {
      throw Error(ErrorKind::Io, "truncated matrix body at entry " + std::to_string(k));
    }
    t.push_back({r, c, cd(re, im)});
  }
  return CSparseMatrix::from_triplets(rows, cols, t);
}

// ---------------------------------------------------------------------------
// Eigendecomposition and matrix functions

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermitian_defect(const Mat& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return max_abs(m - m.adjoint());
}

Mat EigDecomp::reconstruct() const {
  return vectors * values.cast<cd>().asDiagonal() * vectors.adjoint();
}

EigDecomp hermitian_eig(const Mat& m, double rel_tol) {
  const double scale = max_abs(m);
  const double defect = hermitian_defect(m);
  if (defect > rel_tol * std::max(scale, std::numeric_limits<double>::min())) {
    if (!(defect == 0.0)) {
      std::ostringstream msg;
      msg << "dense matrix defect " << defect << " exceeds " << rel_tol << " * " << scale;
      throw Error(ErrorKind::NotHermitian, msg.str());
    }
  }
  EigDecomp out;
  const bool real = m.imag().cwiseAbs().maxCoeff() == 0.0;
  if (real) {
    Eigen::MatrixXd r = 0.5 * (m.real() + m.real().transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors().cast<cd>();
  } else {
    Mat h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

Mat matrix_function(const EigDecomp& e, const RealFunction& f) {
  Vec fv(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) fv[i] = f(e.values[i]);
  return e.vectors * fv.asDiagonal() * e.vectors.adjoint();
}

RealFunction interval_indicator(double lo, double hi, double rel_tol) {
  return [lo, hi, rel_tol](double x) {
    const double tlo = rel_tol * std::max(1.0, std::abs(lo));
    const double thi = rel_tol * std::max(1.0, std::abs(hi));
    return (x >= lo - tlo && x < hi - thi) ? 1.0 : 0.0;
  };
}

// ---------------------------------------------------------------------------
// Solve handles

Mat SolveHandle::solve(const Mat& b) const {
  Mat x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Vec(b.col(j)));
  return x;
}

Mat SolveHandle::solve_adjoint(const Mat& b) const {
  Mat x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve_adjoint(Vec(b.col(j)));
  return x;
}

namespace {

using ColSp = Eigen::SparseMatrix<cd, Eigen::ColMajor>;

double sparse_norm_bound(const SpMat& m) {
  // sqrt(|M|_1 |M|_inf) bounds the spectral norm from above.
  RVec row = RVec::Zero(m.rows()), col = RVec::Zero(m.cols());
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SpMat::InnerIterator it(m, r); it; ++it) {
      row[it.row()] += std::abs(it.value());
      col[it.col()] += std::abs(it.value());
    }
  return std::sqrt(row.maxCoeff() * col.maxCoeff());
}

class SparseLuImpl final : public SolveHandle::Impl {
 public:
  explicit SparseLuImpl(const SpMat& m) : a_(m) {
    lu_.analyzePattern(a_);
    lu_.factorize(a_);
  }
  bool ok() const { return lu_.info() == Eigen::Success; }
  std::string message() const { return lu_.lastErrorMessage(); }
  Eigen::Index size() const override { return a_.rows(); }
  Vec solve(const Vec& b) const override { return lu_.solve(b); }
  Vec solve_adjoint(const Vec& b) const override { return lu_.adjoint().solve(b); }

 private:
  ColSp a_;
  // solve() is logically const; Eigen's transpose views need a mutable object.
  mutable Eigen::SparseLU<ColSp, Eigen::COLAMDOrdering<int>> lu_;
};

class DenseLuImpl final : public SolveHandle::Impl {
 public:
  explicit DenseLuImpl(const Mat& m) : lu_(m) {}
  const Eigen::PartialPivLU<Mat>& lu() const { return lu_; }
  Eigen::Index size() const override { return lu_.rows(); }
  Vec solve(const Vec& b) const override { return lu_.solve(b); }
  Vec solve_adjoint(const Vec& b) const override { return lu_.adjoint().solve(b); }

 private:
  Eigen::PartialPivLU<Mat> lu_;
};

void check_residual(const SolveHandle& h, const std::function<Vec(const Vec&)>& apply,
                    double norm_bound, const char* what) {
  CounterRng rng(kDefaultSeed, "residual-probe");
  const Vec b = rng.unit_vector(h.size());
  const Vec x = h.solve(b);
  const double res = (apply(x) - b).norm();
  if (!x.allFinite() || res > 1e-9 * (norm_bound * x.norm() + b.norm())) {
    std::ostringstream msg;
    msg << what << ": residual " << res << " after factorization";
    throw Error(ErrorKind::SingularMatrix, msg.str());
  }
}

}  // namespace

SolveHandle factorize(const CSparseMatrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, "factorize: not square");
  auto impl = std::make_shared<SparseLuImpl>(m.matrix());
  if (!impl->ok()) throw Error(ErrorKind::SingularMatrix, "sparse LU: " + impl->message());
  SolveHandle h(impl);
  const SpMat& a = m.matrix();
  check_residual(h, [&a](const Vec& x) { return Vec(a * x); }, sparse_norm_bound(a), "sparse LU");
  return h;
}

SolveHandle factorize(const Mat& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, "factorize: not square");
  auto impl = std::make_shared<DenseLuImpl>(m);
  const Mat& lu = impl->lu().matrixLU();
  // Pivot test against the row scale of the permuted input.
  const Mat pa = impl->lu().permutationP() * m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double row_scale = pa.row(i).cwiseAbs().maxCoeff();
    if (!(std::abs(lu(i, i)) >= 1e-14 * row_scale) || row_scale == 0.0) {
      std::ostringstream msg;
      msg << "dense LU pivot " << std::abs(lu(i, i)) << " at row " << i;
      throw Error(ErrorKind::SingularMatrix, msg.str());
    }
  }
  SolveHandle h(impl);
  check_residual(h, [&m](const Vec& x) { return Vec(m * x); }, m.norm(), "dense LU");
  return h;
}

Vec sparse_solve(const CSparseMatrix& m, const Vec& b) { return factorize(m).solve(b); }

// ---------------------------------------------------------------------------
// Operator norms

OpNormResult weighted_op_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                              Eigen::Index n, double tol, int max_iter, std::uint64_t seed) {
  OpNormResult out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  {
    CounterRng check(seed, "adjoint-check");
    const Vec u = check.unit_vector(n);
    const Vec tu = apply(u);
    const Vec v = check.unit_vector(tu.size());
    const cd lhs = v.dot(tu);  // <Tu, v>
    const cd rhs = apply_adjoint(v).dot(u);
    const double scale = std::max(tu.norm(), std::numeric_limits<double>::min());
    out.adjoint_defect = std::abs(lhs - rhs) / scale;
  }
  CounterRng rng(seed, "power-iteration");
  Vec v = rng.unit_vector(n);
  double lambda_prev = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = apply(v);
    const double lambda = w.squaredNorm();
    out.iterations = it;
    out.value = std::sqrt(lambda);
    if (lambda == 0.0) {
      out.converged = true;
      break;
    }
    Vec u = apply_adjoint(w);
    const double un = u.norm();
    if (un == 0.0) {
      out.converged = true;
      break;
    }
    v = u / un;
    if (lambda_prev >= 0.0 && std::abs(lambda - lambda_prev) < tol * lambda) {
      // The Rayleigh quotient of the final direction is at least as accurate.
      out.value = std::sqrt(std::max(lambda, apply(v).squaredNorm()));
      out.converged = true;
      break;
    }
    lambda_prev = lambda;
  }
  return out;
}

OpNormResult psd_max_eigenvalue(const LinearMap& apply, Eigen::Index n, double tol, int max_iter,
                                std::uint64_t seed) {
  OpNormResult out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  CounterRng rng(seed, "psd-power-iteration");
  Vec v = rng.unit_vector(n);
  double prev = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec w = apply(v);
    const double lambda = v.dot(w).real();
    out.iterations = it;
    out.value = std::max(lambda, 0.0);
    const double wn = w.norm();
    if (wn == 0.0) {
      out.converged = true;
      break;
    }
    v = w / wn;
    if (prev >= 0.0 && std::abs(lambda - prev) < tol * std::abs(lambda)) {
      out.converged = true;
      break;
    }
    prev = lambda;
  }
  return out;
}

OpNormResult lanczos_op_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                             Eigen::Index n, double tol, int max_steps, std::uint64_t seed) {
  OpNormResult out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  const int m = static_cast<int>(std::min<Eigen::Index>(n, max_steps));
  CounterRng rng(seed, "lanczos");
  Mat basis(n, m);
  basis.col(0) = rng.unit_vector(n);
  std::vector<double> alpha, beta;
  double prev = -1.0;
  for (int j = 0; j < m; ++j) {
    Vec w = apply_adjoint(apply(basis.col(j)));
    alpha.push_back(basis.col(j).dot(w).real());
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).adjoint() * w);
    const double b = w.norm();
    const auto k = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    const double top = std::max(0.0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly)
                                         .eigenvalues()(k - 1));
    out.iterations = j + 1;
    out.value = std::sqrt(top);
    const bool settled = prev >= 0.0 && std::abs(top - prev) <= tol * top;
    const bool exhausted = b <= 1e-14 * std::max(top, 1e-300);
    if (settled || exhausted || j + 1 == m) {
      out.converged = settled || exhausted;
      break;
    }
    prev = top;
    beta.push_back(b);
    basis.col(j + 1) = w / b;
  }
  return out;
}

double op_norm(const Mat& m, double tol, int max_iter) {
  if (m.size() == 0) return 0.0;
  return weighted_op_norm([&m](const Vec& v) { return Vec(m * v); },
                          [&m](const Vec& v) { return Vec(m.adjoint() * v); }, m.cols(), tol,
                          max_iter)
      .value;
}

double op_norm(const CSparseMatrix& m, double tol, int max_iter) {
  const SpMat& a = m.matrix();
  return weighted_op_norm([&a](const Vec& v) { return Vec(a * v); },
                          [&a](const Vec& v) { return Vec(a.adjoint() * v); }, m.cols(), tol,
                          max_iter)
      .value;
}

// ---------------------------------------------------------------------------
// Factored perturbation inverse

namespace {

class FactoredImpl final : public SolveHandle::Impl {
 public:
  FactoredImpl(SolveHandle t, Mat p1, Mat p2, Mat tinv_p1, Mat tadj_p2s,
               Eigen::PartialPivLU<Mat> gamma)
      : t_(std::move(t)),
        p1_(std::move(p1)),
        p2_(std::move(p2)),
        tinv_p1_(std::move(tinv_p1)),
        tadj_p2s_(std::move(tadj_p2s)),
        gamma_(std::move(gamma)) {}

  Eigen::Index size() const override { return t_.size(); }

  Vec solve(const Vec& b) const override {
    const Vec y = t_.solve(b);
    const Vec g = gamma_.solve(Vec(p2_ * y));
    return y - tinv_p1_ * g;
  }

  Vec solve_adjoint(const Vec& b) const override {
    const Vec y = t_.solve_adjoint(b);
    const Vec g = gamma_.adjoint().solve(Vec(p1_.adjoint() * y));
    return y - tadj_p2s_ * g;
  }

 private:
  SolveHandle t_;
  Mat p1_, p2_, tinv_p1_, tadj_p2s_;
  Eigen::PartialPivLU<Mat> gamma_;
};

}  // namespace

FactoredInverse factored_inverse(const SolveHandle& t_solve, const Mat& p1, const Mat& p2) {
  const Eigen::Index n = t_solve.size();
  if (p1.rows() != n || p2.cols() != n || p1.cols() != p2.rows())
    throw Error(ErrorKind::InvalidArgument, "factored_inverse: incompatible P1/P2 shapes");
  const Eigen::Index k = p1.cols();
  Mat tinv_p1 = t_solve.solve(p1);
  Mat tadj_p2s = t_solve.solve_adjoint(Mat(p2.adjoint()));
  const Mat inner = p2 * tinv_p1;
  const Mat gamma = Mat::Identity(k, k) + inner;

  FactoredInverse out;
  out.contraction = op_norm(inner);
  out.hypothesis_ok = out.contraction < 1.0;

  Eigen::PartialPivLU<Mat> lu(gamma);
  const Mat& f = lu.matrixLU();
  const double scale = std::max(1.0, max_abs(gamma));
  for (Eigen::Index i = 0; i < k; ++i)
    if (!(std::abs(f(i, i)) >= 1e-14 * scale))
      throw Error(ErrorKind::GammaSingular, "1 + P2 T^-1 P1 is singular");

  out.handle = SolveHandle(std::make_shared<FactoredImpl>(t_solve, p1, p2, std::move(tinv_p1),
                                                          std::move(tadj_p2s), std::move(lu)));
  return out;
}

FactoredInverse factored_inverse(const SolveHandle& t_solve, const CSparseMatrix& p1,
                                 const CSparseMatrix& p2) {
  return factored_inverse(t_solve, p1.dense(), p2.dense());
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dlap
