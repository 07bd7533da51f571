#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dlap/conjugate.hpp"
#include "dlap/rng.hpp"

using namespace dlap;

namespace {

DissipativeModel small_waveguide() {
  GridSpec g;
  g.L = 10.0;
  g.nx = 33;
  g.ny = 5;
  return build_waveguide(g, AbsorptionProfile::gaussian(0.3, 2.0));
}

DissipativeModel free_line(int nx, double L) {
  GridSpec g;
  g.L = L;
  g.nx = nx;
  g.ny = 1;
  return build_delta1d(g, 0.0);
}

Mat kron_identity(const Mat& f, int ny) {
  Mat out = Mat::Zero(f.rows() * ny, f.cols() * ny);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j)
      for (int k = 0; k < ny; ++k) out(i * ny + k, j * ny + k) = f(i, j);
  return out;
}

}  // namespace

TEST_CASE("dilation generator is Hermitian with a consistent spectrum") {
  const auto m = small_waveguide();
  const auto c = build_dilation_generator(m);
  CHECK(c.A.hermitian_defect() < 1e-12);
  CHECK(max_abs(c.eig.reconstruct() - c.A.dense()) < 1e-10);
  CHECK(max_abs(kron_identity(c.ax, c.ny) - c.A.dense()) < 1e-14);
}

TEST_CASE("apply_x_factor matches the Kronecker product") {
  const auto m = small_waveguide();
  const auto c = build_dilation_generator(m);
  const Mat f = c.factor([](double l) { return std::atan(l); });
  const Vec v = CounterRng(1, "v").complex_normal(m.size());
  CHECK((apply_x_factor(f, c.ny, v) - kron_identity(f, c.ny) * v).norm() < 1e-12);
  CHECK(max_abs(c.function([](double l) { return std::atan(l); }) - kron_identity(f, c.ny)) < 1e-12);
}

TEST_CASE("weights and half-line projectors") {
  const auto c = build_dilation_generator(small_waveguide());
  const Eigen::Index n = c.size();
  CHECK(max_abs(c.weight(0.0) - Mat::Identity(n, n)) == 0.0);
  CHECK(op_norm(c.weight(1.0)) <= 1.0 + 1e-12);
  CHECK_THROWS_AS(c.weight(-1.0), Error);
  const Mat p = c.halfline_projector(1), q = c.halfline_projector(-1);
  CHECK(max_abs(p + q - Mat::Identity(n, n)) < 1e-12);
  CHECK(max_abs(p * p - p) < 1e-12);
  CHECK(max_abs(p * q) < 1e-12);
  const Mat a = c.A.dense();
  CHECK(max_abs(p * a - a * p) < 1e-10);
  // A is nonnegative on Ran 1_+(A).
  CHECK(hermitian_eig(p * a * p).values.minCoeff() > -1e-10);
}

TEST_CASE("matrix commutator reproduces the virial identity on smooth interior data") {
  const double L = 20.0;
  double previous = 0.0;
  for (int nx : {401, 801}) {
    const auto m = free_line(nx, L);
    const auto c = build_dilation_generator(m);
    const auto chain = ad_chain(m, c, 1);
    Vec u(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double x = m.x_of_node(i);
      u(i) = std::exp(-(x - 3.0) * (x - 3.0) / 2.0) * std::sqrt(m.mass_weights(i));
    }
    const double lhs = u.dot(chain.B[0].apply(u)).real();
    const double rhs = 2.0 * u.dot(m.H0.apply(u)).real();
    const double err = std::abs(lhs - rhs) / rhs;
    CHECK(err < 1e-2);
    if (previous > 0.0) CHECK(previous / err > 3.0);
    previous = err;
  }
}

TEST_CASE("ad_chain follows the commutator recursion") {
  const auto m = small_waveguide();
  const auto c = build_dilation_generator(m);
  const auto chain = ad_chain(m, c, 3);
  REQUIRE(chain.B.size() == 4);
  const Mat a = c.A.dense();
  const Mat h = m.H().dense();
  const Mat h0 = m.H0.dense();
  CHECK(max_abs(chain.B[0].dense() - kI * (h0 * a - a * h0)) < 1e-9);
  CHECK(max_abs(chain.B[1].dense() - kI * (h * a - a * h)) < 1e-9);
  for (int n = 2; n <= 3; ++n) {
    const Mat b = chain.B[n - 1].dense();
    const double scale = max_abs(chain.B[n].dense());
    CHECK(max_abs(chain.B[n].dense() - kI * (b * a - a * b)) < 1e-12 * scale);
  }
  CHECK_THROWS_AS(ad_chain(m, c, kMaxChainOrder + 1), Error);
}

TEST_CASE("form chain reduces to powers of two without absorption") {
  GridSpec g;
  g.L = 10.0;
  g.nx = 33;
  g.ny = 5;
  const auto m = build_waveguide(g, AbsorptionProfile::constant(0.0));
  const auto chain = form_chain(m, 3);
  REQUIRE(chain.B.size() == 4);
  CHECK(max_abs(chain.B[0].dense() - 2.0 * m.Hx.dense()) == 0.0);
  for (int n = 1; n <= 3; ++n)
    CHECK(max_abs(chain.B[n].dense() - std::pow(2.0, n) * m.Hx.dense()) < 1e-12);

  const auto absorbing = small_waveguide();
  const auto chain2 = form_chain(absorbing, 2);
  // The dissipative part of B[n] is -i Theta[(-x d/dx)^n a].
  const Mat im = (chain2.B[1].dense() - 2.0 * absorbing.Hx.dense()) / (-kI);
  CHECK(max_abs(im - absorbing.dilation_absorption(1).dense()) < 1e-12);
}

TEST_CASE("KK* norm agrees with dense SVD") {
  GridSpec g;
  g.L = 10.0;
  g.nx = 25;
  g.ny = 5;
  const Setup s(build_waveguide(g, AbsorptionProfile::gaussian(0.3, 2.0)));
  const auto chain = form_chain(s.model, 1);
  const Mat dense = s.k_minus * chain.B[1].dense() * s.k_minus;
  const double exact = Eigen::JacobiSVD<Mat>(dense).singularValues()(0);
  CHECK(s.kkstar_norm(chain.B[1]) == doctest::Approx(exact).epsilon(1e-7));
  CHECK(max_abs(s.k_minus * s.k_plus - Mat::Identity(s.size(), s.size())) < 1e-10);
}
