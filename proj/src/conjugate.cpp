#include "dlap/conjugate.hpp"

#include <algorithm>
#include <cmath>

namespace dlap {

Vec apply_x_factor(const Mat& f, int ny, const Vec& v) {
  if (ny == 1) return f * v;
  // Node k = i * ny + j: view v as an ny x nx column-major block, so f acts on rows.
  Eigen::Map<const Mat> vm(v.data(), ny, f.cols());
  Vec out(v.size());
  Eigen::Map<Mat> om(out.data(), ny, f.rows());
  om.noalias() = vm * f.transpose();
  return out;
}

Mat ConjugateOperator::factor(const RealFunction& f) const {
  Eigen::SelfAdjointEigenSolver<Mat> es(ax);
  RVec fv(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv[i] = f(es.eigenvalues()[i]);
  return es.eigenvectors() * fv.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
}

Mat ConjugateOperator::function(const RealFunction& f) const {
  const Mat fx = factor(f);
  if (ny == 1) return fx;
  const Eigen::Index nx = fx.rows();
  Mat out = Mat::Zero(nx * ny, nx * ny);
  for (Eigen::Index p = 0; p < nx; ++p)
    for (Eigen::Index q = 0; q < nx; ++q)
      for (int j = 0; j < ny; ++j) out(p * ny + j, q * ny + j) = fx(p, q);
  return out;
}

Mat ConjugateOperator::weight(double delta) const {
  if (delta < 0.0) throw Error(ErrorKind::InvalidArgument, "weight exponent must be >= 0");
  if (delta == 0.0) return Mat::Identity(size(), size());
  return function([delta](double l) { return std::pow(1.0 + l * l, -0.5 * delta); });
}

Mat ConjugateOperator::halfline_projector(int sign) const {
  if (sign > 0) return function([](double l) { return l >= 0.0 ? 1.0 : 0.0; });
  return function([](double l) { return l < 0.0 ? 1.0 : 0.0; });
}

Mat centered_difference(const RVec& w) {
  const Eigen::Index n = w.size();
  Mat s = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    s(i, i + 1) = 0.5;
    s(i + 1, i) = -0.5;
  }
  const RVec r = w.cwiseSqrt().cwiseInverse();
  return r.cast<cd>().asDiagonal() * s * r.cast<cd>().asDiagonal();
}

ConjugateOperator build_dilation_generator(const DissipativeModel& model) {
  const int nx = model.grid.nx, ny = model.grid.ny;
  RVec x(nx);
  for (int i = 0; i < nx; ++i) x[i] = model.x_of_node[static_cast<Eigen::Index>(i) * ny];
  const Mat d = centered_difference(model.wx);
  const Mat xm = x.cast<cd>().asDiagonal();
  Mat ax = cd(0.0, -0.5) * (xm * d + d * xm);
  ax = 0.5 * (ax + ax.adjoint()).eval();

  ConjugateOperator c;
  c.ax = ax;
  c.ny = ny;
  std::vector<CSparseMatrix::Triplet> t;
  for (int p = 0; p < nx; ++p)
    for (int q = std::max(0, p - 1); q <= std::min(nx - 1, p + 1); ++q) {
      if (ax(p, q) == cd(0.0)) continue;
      for (int j = 0; j < ny; ++j)
        t.push_back({static_cast<Eigen::Index>(p) * ny + j, static_cast<Eigen::Index>(q) * ny + j,
                     ax(p, q)});
    }
  const Eigen::Index n = static_cast<Eigen::Index>(nx) * ny;
  c.A = CSparseMatrix::from_triplets(n, n, t, true);

  const EigDecomp ex = hermitian_eig(ax);
  std::vector<std::pair<double, Eigen::Index>> order;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) order.push_back({ex.values[i], i * ny + j});
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  c.eig.values.resize(n);
  c.eig.vectors = Mat::Zero(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    c.eig.values[col] = order[col].first;
    const Eigen::Index i = order[col].second / ny, j = order[col].second % ny;
    for (Eigen::Index p = 0; p < nx; ++p) c.eig.vectors(p * ny + j, col) = ex.vectors(p, i);
  }
  return c;
}

namespace {

CSparseMatrix commutator_i(const CSparseMatrix& b, const CSparseMatrix& a) {
  // i (B A - A B)
  return cd(0.0, 1.0) * (b * a - a * b);
}

}  // namespace

CommutatorChain ad_chain(const DissipativeModel& model, const ConjugateOperator& conj, int N) {
  if (N < 0 || N > kMaxChainOrder)
    throw Error(ErrorKind::OrderTooLarge, "commutator order " + std::to_string(N));
  CommutatorChain c;
  c.B.push_back(commutator_i(model.H0, conj.A).as_hermitian(1e-10));
  if (N >= 1) c.B.push_back(commutator_i(model.H(), conj.A));
  for (int n = 2; n <= N; ++n) c.B.push_back(commutator_i(c.B.back(), conj.A));
  return c;
}

CommutatorChain form_chain(const DissipativeModel& model, int N) {
  if (N < 0 || N > kMaxChainOrder)
    throw Error(ErrorKind::OrderTooLarge, "commutator order " + std::to_string(N));
  CommutatorChain c;
  c.B.push_back((2.0 * model.Hx).as_hermitian());
  for (int n = 1; n <= N; ++n) {
    c.B.push_back(std::pow(2.0, n) * model.Hx -
                  cd(0.0, 1.0) * model.dilation_absorption(n));
  }
  return c;
}

Setup::Setup(DissipativeModel m)
    : model(std::move(m)), conj(build_dilation_generator(model)), h0(model.h0_eig()) {
  k_minus = model.h0_function([](double l) { return 1.0 / std::sqrt(1.0 + std::max(l, 0.0)); });
  k_plus = model.h0_function([](double l) { return std::sqrt(1.0 + std::max(l, 0.0)); });
}

double Setup::kkstar_norm(const LinearMap& x, const LinearMap& x_adj) const {
  const Mat& k = k_minus;
  return lanczos_op_norm([&](const Vec& v) { return Vec(k * x(k * v)); },
                          [&](const Vec& v) { return Vec(k * x_adj(k * v)); }, size(), 1e-10,
                          300)
      .value;
}

double Setup::kkstar_norm(const CSparseMatrix& x) const {
  return kkstar_norm([&x](const Vec& v) { return x.apply(v); },
                     [&x](const Vec& v) { return x.apply_adjoint(v); });
}

double Setup::kstark_norm(const LinearMap& x, const LinearMap& x_adj) const {
  const Mat& k = k_plus;
  return lanczos_op_norm([&](const Vec& v) { return Vec(k * x(k * v)); },
                          [&](const Vec& v) { return Vec(k * x_adj(k * v)); }, size(), 1e-10,
                          300)
      .value;
}

void fill_kkstar_norms(const Setup& setup, CommutatorChain& chain) {
  chain.norms_KKstar.clear();
  for (const auto& b : chain.B) chain.norms_KKstar.push_back(setup.kkstar_norm(b));
}

}  // namespace dlap
