#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dlap/evolution.hpp"
#include "dlap/rng.hpp"

using namespace dlap;

namespace {

DissipativeModel line(double a, EndLayer layer = {}) {
  GridSpec g;
  g.L = 20.0;
  g.nx = 129;
  g.ny = 1;
  return build_delta1d(g, a, layer);
}

const Setup& absorbing_setup() {
  static const Setup s(line(1.0, EndLayer{5.0, 1.0}));
  return s;
}

const Setup& free_setup() {
  static const Setup s(line(0.0));
  return s;
}

Vec exact_free_evolution(const EigDecomp& e, const Vec& u, double t) {
  const Vec c = e.vectors.adjoint() * u;
  Vec phase(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) phase(k) = std::exp(-kI * e.values(k) * t) * c(k);
  return e.vectors * phase;
}

Vec bump(const DissipativeModel& m, double x0) {
  Vec u(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double x = m.x_of_node(i);
    u(i) = std::exp(-(x - x0) * (x - x0)) * std::sqrt(m.mass_weights(i));
  }
  return u / u.norm();
}

}  // namespace

TEST_CASE("Cayley steps are unitary without absorption") {
  const auto& m = free_setup().model;
  const Vec u0 = CounterRng(1, "u").unit_vector(m.size());
  const auto tr = evolve(m.H(), u0, 0.05, 10.0);
  CHECK(tr.steps == 200);
  CHECK(std::abs(tr.final_state.norm() - 1.0) < 1e-12);
  CHECK(tr.max_norm_increase < 1e-13);
}

TEST_CASE("Cayley steps contract with absorption") {
  const auto& m = absorbing_setup().model;
  const Vec u0 = bump(m, 0.0);
  const auto tr = evolve(m.H(), u0, 0.05, 20.0);
  CHECK(tr.max_norm_increase <= 1e-14);
  for (std::size_t k = 1; k < tr.samples.size(); ++k)
    CHECK(tr.samples[k].norm <= tr.samples[k - 1].norm + 1e-14);
  CHECK(tr.final_state.norm() < 0.99);
}

TEST_CASE("Cayley stepping converges at second order") {
  const Setup& s = free_setup();
  const Vec u0 = bump(s.model, 2.0);
  const double T = 2.0;
  const Vec exact = exact_free_evolution(s.h0, u0, T);
  std::vector<double> err;
  for (double dt : {0.02, 0.01, 0.005})
    err.push_back((evolve(s.model.H(), u0, dt, T).final_state - exact).norm());
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("adjoint stepping is the adjoint of forward stepping") {
  const auto& m = absorbing_setup().model;
  const Vec u = CounterRng(2, "u").unit_vector(m.size());
  const Vec v = CounterRng(2, "v").unit_vector(m.size());
  EvolveOptions adj;
  adj.direction = Direction::Adjoint;
  const Vec fu = evolve(m.H(), u, 0.05, 5.0).final_state;
  const Vec av = evolve(m.H(), v, 0.05, 5.0, adj).final_state;
  CHECK(std::abs(fu.dot(v) - u.dot(av)) < 1e-12);
  CHECK_THROWS_AS(CayleyPropagator(m.H(), 0.0), Error);
}

TEST_CASE("trajectory samples and CSV") {
  const auto& m = absorbing_setup().model;
  const Vec u0 = bump(m, 0.0);
  const auto Q = identity_weight(m.size());
  EvolveOptions o;
  o.sample_every = 10;
  o.Q = &Q;
  o.probe = &u0;
  const auto tr = evolve(m.H(), u0, 0.01, 1.0, o);
  REQUIRE(tr.samples.size() == 11);
  CHECK(tr.samples.front().overlap == cd(1.0));
  CHECK(tr.samples.back().Q_norm_sq == doctest::Approx(tr.samples.back().norm * tr.samples.back().norm));
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  const std::string text = os.str();
  CHECK(text.rfind("t,norm,Q_norm_sq,overlap_re,overlap_im\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
}

TEST_CASE("smoothing constant of the identity weight on a self-adjoint operator") {
  const Setup& s = free_setup();
  const auto zs = smoothing_z_grid({0.5, 1.5}, {0.5, 0.1}, 7);
  REQUIRE(zs.size() == 14);
  const auto c = smoothing_constant(s.model.H0, identity_weight(s.size()), zs, 5);
  // ((R - R*)/i) has eigenvalues 2 mu / ((l - tau)^2 + mu^2).
  double oracle = 0.0;
  for (cd z : zs)
    for (Eigen::Index k = 0; k < s.h0.size(); ++k) {
      const double d = s.h0.values(k) - z.real();
      oracle = std::max(oracle, 2.0 * z.imag() / (d * d + z.imag() * z.imag()));
    }
  CHECK(c.C == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(c.C <= 2.0 / 0.1 * (1.0 + 1e-12));
  CHECK(c.imaginary_residue < 1e-10);
}

TEST_CASE("zero weight or zero data give zero") {
  const auto& m = free_setup().model;
  const auto zs = smoothing_z_grid({0.5, 1.5}, {0.1}, 3);
  CHECK(smoothing_constant(m.H0, zero_weight(m.size()), zs, 3).C == 0.0);
  SmoothingOptions o;
  o.T0 = 5.0;
  o.T_cap = 5.0;
  const auto r = smoothing_integral(m.H0, identity_weight(m.size()), Vec::Zero(m.size()), 1.0, o);
  CHECK(r.integral_forward == 0.0);
  CHECK(r.integral_adjoint == 0.0);
  CHECK(r.ratio == 0.0);
}

TEST_CASE("resolvent smoothing constant bounds the time integral") {
  const Setup& s = absorbing_setup();
  const auto Q = cutoff_weight(s, 1.0, interval_indicator(0.5, 2.5));
  REQUIRE(Q.rank() > 0);
  const auto zs = smoothing_z_grid({0.0, 3.0}, {0.1, 0.03, 0.01, 0.003}, 41);
  const auto C = smoothing_constant(s.model.H(), Q, zs, 10);
  CHECK(C.C > 0.0);
  SmoothingOptions o;
  o.dt = 0.02;
  const Vec psi = CounterRng(3, "psi").unit_vector(s.size());
  const auto r = smoothing_integral(s.model.H(), Q, psi, C.C, o);
  CHECK(r.tail_converged);
  CHECK(r.ratio <= 1.1);
  CHECK(r.ratio_adjoint <= 1.1);
  CHECK(r.max_norm_increase <= 1e-10);
  // Forward and adjoint integrals have the same resolvent bound.
  CHECK(r.integral_forward / r.integral_adjoint < 2.0);
  CHECK(r.integral_adjoint / r.integral_forward < 2.0);
}

TEST_CASE("Davies statistic respects Cauchy-Schwarz") {
  const Setup& s = absorbing_setup();
  DaviesOptions o;
  o.T0 = 25.0;
  o.T_cap = 400.0;
  o.dt = 0.02;
  const auto r = ac_subspace_check(s, 1.0, {0.5, 2.5}, 2, o);
  CHECK(r.statistic <= r.norm_integral * (1.0 + 1e-12));
  CHECK(r.stable);
  CHECK(r.statistic >= r.statistic_previous);
  CHECK_THROWS_AS(ac_subspace_check(s, 0.5, {0.5, 2.5}, 1, o), Error);
}

TEST_CASE("Davies statistic grows for an eigenvector of a self-adjoint operator") {
  const Setup& s = free_setup();
  const Vec phi = s.h0.vectors.col(10);
  DaviesOptions o;
  o.T0 = 10.0;
  o.T_cap = 40.0;
  o.dt = 0.02;
  const auto r = davies_statistic(s.model.H0, {phi}, o);
  CHECK_FALSE(r.stable);
  CHECK(r.growth > 0.5);
  o.strict = true;
  CHECK_THROWS_AS(davies_statistic(s.model.H0, {phi}, o), Error);
}

TEST_CASE("weighted cutoff without weights is the spectral maximum") {
  const Setup& s = absorbing_setup();
  const auto chi = [](double l) { return l >= 0.5 && l <= 2.5 ? std::sin(l) : 0.0; };
  double oracle = 0.0;
  for (Eigen::Index k = 0; k < s.h0.size(); ++k)
    oracle = std::max(oracle, (s.h0.values(k) + 1.0) * std::abs(chi(s.h0.values(k))));
  CHECK(weighted_cutoff_boundedness(s, 0.0, chi) == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(std::isfinite(weighted_cutoff_boundedness(s, 2.0, chi)));
  CHECK_THROWS_AS(weighted_cutoff_boundedness(s, 6.0, chi), Error);
}
