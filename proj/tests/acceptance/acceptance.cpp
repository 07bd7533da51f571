// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit on failure.
// Oracles (Krein kernel, dense inverses, closed-form norms) are computed here
// independently of the library code paths under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dlap/config.hpp"
#include "dlap/conjugate.hpp"
#include "dlap/evolution.hpp"
#include "dlap/lap.hpp"
#include "dlap/models.hpp"
#include "dlap/mourre.hpp"
#include "dlap/rng.hpp"

#ifndef DLAP_SOURCE_DIR
#define DLAP_SOURCE_DIR "."
#endif
#ifndef DLAP_CLI_PATH
#define DLAP_CLI_PATH "dlap"
#endif

using namespace dlap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::map<std::string, std::string> model_of(const std::string& cfg) {
  return RunConfig::load(std::string(DLAP_SOURCE_DIR) + "/configs/" + cfg).model;
}

const Setup& waveguide() {
  static const Setup s(build_model(model_of("waveguide.cfg")));
  return s;
}

const Setup& delta_line() {
  static const Setup s(build_model(model_of("delta1d.cfg")));
  return s;
}

// Free Green kernel plus the rank-one correction of the point interaction.
cd krein_kernel(double a, cd z, double x, double y) {
  cd k = std::sqrt(z);
  if (k.imag() < 0.0) k = -k;
  auto g0 = [k](double s, double t) { return cd(0.0, 1.0) * std::exp(cd(0.0, 1.0) * k * std::abs(s - t)) / (2.0 * k); };
  return g0(x, y) + cd(0.0, a) * g0(x, 0.0) * g0(0.0, y) / (1.0 - cd(0.0, a) * g0(0.0, 0.0));
}

// Relative weighted L2 error of <x>^{-1} (H - z)^{-1} <x>^{-1} applied to a Gaussian probe.
double krein_probe_error(int nx) {
  const double a = 1.0;
  const cd z(1.0, 0.5);
  GridSpec g;
  g.L = 40.0;
  g.nx = nx;
  g.ny = 1;
  const DissipativeModel m = build_delta1d(g, a);
  const Eigen::Index n = m.size();
  RVec wt(n), f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = m.x_of_node[i];
    wt[i] = 1.0 / std::sqrt(1.0 + x * x);
    f[i] = std::exp(-x * x) * wt[i];
  }
  const RVec sw = m.mass_weights.cwiseSqrt();
  const Vec rhs = (sw.array() * f.array()).cast<cd>().matrix();
  const Vec usym = sparse_solve(m.H() - z * CSparseMatrix::identity(n), rhs);

  const int fine = 48001;
  const double ylo = -12.0, hy = 24.0 / (fine - 1);
  std::vector<double> ys(fine), fy(fine);
  for (int j = 0; j < fine; ++j) {
    ys[j] = ylo + j * hy;
    fy[j] = std::exp(-ys[j] * ys[j]) / std::sqrt(1.0 + ys[j] * ys[j]) * (j == 0 || j == fine - 1 ? 0.5 : 1.0);
  }
  double num2 = 0.0, den2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = m.x_of_node[i];
    cd acc(0.0, 0.0);
    for (int j = 0; j < fine; ++j) acc += krein_kernel(a, z, x, ys[j]) * fy[j];
    const cd exact = wt[i] * acc * hy;
    const cd approx = wt[i] * usym[i] / sw[i];
    num2 += m.mass_weights[i] * std::norm(approx - exact);
    den2 += m.mass_weights[i] * std::norm(exact);
  }
  return std::sqrt(num2 / den2);
}

Outcome c1_oracle() {
  const std::vector<int> grids{257, 513, 1025};
  std::vector<double> err;
  for (int nx : grids) err.push_back(krein_probe_error(nx));
  const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  const bool pass = err[1] < 5e-3 && std::min(o1, o2) >= 1.8;
  return {pass, "err(513)=" + num(err[1]) + " orders=" + num(o1) + "," + num(o2)};
}

Outcome c2_mourre() {
  const MourreCertificate c = mourre_certificate(waveguide(), {2.0, 6.0}, 0.0);
  return {c.alpha_observed >= 0.9 * c.alpha_predicted && c.alpha_predicted > 0.0,
          "alpha_obs=" + num(c.alpha_observed) + " alpha_pred=" + num(c.alpha_predicted) +
              " rank=" + std::to_string(c.rank)};
}

const std::vector<double> kMus{1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};

std::vector<double> uniform(double lo, double hi, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(lo + (hi - lo) * k / (count - 1));
  return out;
}

// Eigenvalues of H0 inside I, thinned to at most `count`.
std::vector<double> h0_levels(const Setup& s, const Interval& I, int count) {
  std::vector<double> all;
  for (Eigen::Index i = 0; i < s.h0.size(); ++i)
    if (s.h0.values[i] > I.lo && s.h0.values[i] < I.hi) all.push_back(s.h0.values[i]);
  std::vector<double> out;
  const std::size_t step = std::max<std::size_t>(1, all.size() / static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < all.size() && static_cast<int>(out.size()) < count; k += step) out.push_back(all[k]);
  return out;
}

// Mean growth factor of v(mu) per halving of mu.
double per_halving(const std::vector<double>& mus, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < mus.size(); ++k)
    acc += std::log(v[k + 1] / v[k]) / std::log(mus[k] / mus[k + 1]);
  return std::pow(2.0, acc / static_cast<double>(mus.size() - 1));
}

Outcome c3_lap() {
  const Setup& s = waveguide();
  SweepOptions so;
  so.fit_holder = false;
  const LapSweep w = lap_sweep(s, 1.0, {3.0, 5.0}, kMus, uniform(3.0, 5.0, 9), so);
  so.which = ResolventOf::H0;
  const LapSweep u = lap_sweep(s, 0.0, {3.0, 5.0}, kMus, h0_levels(s, {3.0, 5.0}, 5), so);
  const double h = per_halving(kMus, u.column_max);
  return {w.plateau_ratio <= 1.5 && std::abs(h - 2.0) <= 0.4,
          "plateau_ratio=" + num(w.plateau_ratio) + " control_per_halving=" + num(h)};
}

Outcome c4_holder() {
  const Setup& s = delta_line();
  auto pairs = geometric_pairs({1.25, 1.5, 1.75}, 0.25, 0.5, 6);
  const std::vector<double> taus = uniform(1.0, 2.0, 9);
  for (std::size_t a = 0; a < taus.size(); ++a)
    for (std::size_t b = a + 1; b < taus.size(); ++b) pairs.push_back({taus[a], taus[b]});
  const HolderFit f = holder_fit(s, 1.0, 1e-4, pairs);
  const double expected = 1.0 / 3.0;
  return {f.exponent >= expected - 0.15,
          "exponent=" + num(f.exponent) + " expected=" + num(expected) + " pairs=" + std::to_string(f.pairs_used)};
}

Outcome c5_quadratic() {
  double worst = -1.0;
  for (const Setup* s : {&waveguide(), &delta_line()}) {
    const Interval I = s == &waveguide() ? Interval{3.0, 5.0} : Interval{1.0, 2.0};
    std::uint64_t k = 0;
    for (double mu : {1e-1, 1e-2, 1e-3, 1e-4})
      for (double tau : uniform(I.lo, I.hi, 5)) {
        const QuadraticEstimate q = quadratic_estimate_check(s->model, {tau, mu}, 100, kDefaultSeed + k++);
        worst = std::max({worst, q.max_violation, q.max_violation_adjoint});
      }
  }
  return {worst <= 1e-10, "max_relative_violation=" + num(worst)};
}

RegularizedFamily waveguide_family() {
  const Setup& s = waveguide();
  const MourreCertificate c = mourre_certificate(s, {2.0, 6.0}, 0.0, {0.9, 1, false, false});
  return make_regularized_family(s, {2.0, 6.0}, {3.0, 5.0}, 0.0, c.alpha_observed);
}

double family_eps0(const RegularizedFamily& F) {
  return F.alpha / (2.0 * op_norm(F.S));
}

std::vector<double> geometric(double hi, double lo, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(hi * std::pow(lo / hi, static_cast<double>(k) / (count - 1)));
  return out;
}

Outcome c6_regularized() {
  const RegularizedFamily F = waveguide_family();
  std::vector<cd> zs;
  for (double tau : h0_levels(*F.setup, F.I, 3)) zs.push_back({tau, 1e-4});
  const double eps0 = std::min(family_eps0(F), find_eps0(F, zs, 1.0));
  const EpsScan scan = regularized_scan(F, zs, geometric(eps0, 1e-3, 6));
  return {scan.ratio <= 10.0, "ratio=" + num(scan.ratio) + " eps0=" + num(eps0)};
}

Outcome c7_identities() {
  const RegularizedFamily F = waveguide_family();
  const double eps0 = family_eps0(F);
  double worst = 0.0;
  for (cd z : {cd(3.5, 1e-2), cd(4.0, 1e-3), cd(4.5, 1e-4)})
    for (double eps : {1e-3, 0.5 * eps0}) worst = std::max(worst, gmag_identity_residual(F, z, eps).relative());

  // Woodbury against a dense inverse on random small instances.
  CounterRng rng(kDefaultSeed, "acceptance-woodbury");
  double worst_w = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 5 + inst % 26, r = 1 + inst % 4;
    Mat t(n, n), p1(n, r), p2(r, n);
    for (int j = 0; j < n; ++j) t.col(j) = rng.complex_normal(n);
    t += 3.0 * std::sqrt(double(n)) * Mat::Identity(n, n);
    for (int j = 0; j < r; ++j) p1.col(j) = rng.complex_normal(n);
    for (int j = 0; j < n; ++j) p2.col(j) = rng.complex_normal(r) * 0.3;
    const FactoredInverse fi = factored_inverse(factorize(t), p1, p2);
    const Mat dense = (t + p1 * p2).inverse();
    const Vec b = rng.complex_normal(n);
    worst_w = std::max(worst_w, (fi.handle.solve(b) - dense * b).norm() / (dense * b).norm());
  }
  return {worst <= 1e-8 && worst_w <= 1e-8,
          "identity_residual=" + num(worst) + " woodbury_error=" + num(worst_w)};
}

Outcome c8_ode() {
  const RegularizedFamily F = waveguide_family();
  const double eps0 = family_eps0(F);
  const double delta = 1.0;
  int violations = 0, intervals = 0;
  double c1 = 0.0, c2 = 0.0;
  for (cd z : {cd(4.0, 1e-3), cd(3.3, 1e-4), cd(4.5, 1e-1)}) {
    const auto samples = sample_F(F, delta, z, geometric(eps0, 1e-4, 20), 4);
    const OdeFit fit = ode_bound_check(samples, 0.5, 1.5 - delta, 0.0);
    violations += fit.violations;
    intervals += fit.intervals;
    c1 = std::max(c1, fit.c1);
    c2 = std::max(c2, fit.c2);
  }
  return {violations <= 0.1 * intervals, "violations=" + std::to_string(violations) + "/" +
                                             std::to_string(intervals) + " c1=" + num(c1) + " c2=" + num(c2)};
}

Outcome c9_commutators() {
  const Setup& s = delta_line();
  const int N = 3;
  const CommutatorChain chain = ad_chain(s.model, s.conj, N + 1);
  const std::vector<cd> zs{{1.5, 1e-2}, {1.25, 1e-3}};
  const double epsN = find_eps_N(s.model, chain, N, zs, 1.0);
  const double eps = 0.5 * epsN;
  double resid = 0.0;
  for (cd z : zs) {
    const CnFamily f = cn_family(s, chain, N, eps, z, 1e-4 * eps);
    for (double r : f.derivative_residual) resid = std::max(resid, r);
  }

  const double delta = 2.2;
  const std::vector<Mat> factors(3);  // R Phi R with identity factors
  std::vector<double> sym, lft, rgt, mix;
  for (double mu : kMus) {
    double a = 0, b = 0, c = 0, d = 0;
    for (double tau : uniform(1.0, 2.0, 5)) {
      const InsertionNorms in = insertion_norms(s, factors, {tau, mu}, delta, 0.4, 0.4, N);
      a = std::max(a, in.symmetric);
      b = std::max(b, in.left);
      c = std::max(c, in.right);
      d = std::max(d, in.mixed);
    }
    sym.push_back(a), lft.push_back(b), rgt.push_back(c), mix.push_back(d);
  }
  auto plateau = [](const std::vector<double>& v) {
    const auto first = v.end() - 3;
    return *std::max_element(first, v.end()) / *std::min_element(first, v.end());
  };
  const double p = std::max({plateau(sym), plateau(lft), plateau(rgt), plateau(mix)});

  std::vector<double> control;
  const std::vector<double> lv = h0_levels(s, {1.0, 2.0}, 3);
  for (double mu : kMus) {
    double m = 0.0;
    for (double tau : lv) m = std::max(m, unweighted_insertion_norm(s, 2, {tau, mu}, ResolventOf::H0));
    control.push_back(m);
  }
  const double h = per_halving(kMus, control);  // mu^{-2} gives 4 per halving
  return {resid < 1e-3 && p <= 2.0 && std::abs(h - 4.0) <= 0.8,
          "eps_N=" + num(epsN) + " derivative_residual=" + num(resid) + " insertion_plateau=" + num(p) +
              " control_per_halving=" + num(h)};
}

Outcome c10_wave() {
  const DissipativeModel& m = waveguide().model;
  const cd z(1.5, 0.1);
  const double r4 = wave_derivative_check(m, z, 1e-4);
  const double ra = wave_derivative_check(m, z, 2e-2), rb = wave_derivative_check(m, z, 1e-2);
  const double order = std::log2(ra / rb);
  return {r4 < 1e-6 && order > 1.8, "residual(1e-4)=" + num(r4) + " order=" + num(order)};
}

Outcome c11_smoothing() {
  // Smoothing on the line model, Davies statistic on the waveguide.
  const Setup& s = delta_line();
  const Interval J{0.5, 2.5}, I{1.0, 2.0};
  const WeightOperator Q = cutoff_weight(s, 1.0, phi_cutoff(J, I));
  const CSparseMatrix H = s.model.H();
  const SmoothingConstant sc = smoothing_constant(H, Q, smoothing_z_grid({0.0, 3.0}, kMus, 41));
  CounterRng rng(kDefaultSeed, "acceptance-psi");
  std::vector<Vec> psis{rng.unit_vector(s.size())};
  // A state concentrated where Q acts: the range of Q* on a random vector.
  const Vec local = Q.apply_adjoint(rng.unit_vector(s.size()));
  psis.push_back(local / local.norm());
  double ratio = 0.0, increase = 0.0;
  bool tail = true;
  for (const Vec& psi : psis) {
    const SmoothingReport r = smoothing_integral(H, Q, psi, sc.C);
    ratio = std::max({ratio, r.ratio, r.ratio_adjoint});
    increase = std::max(increase, r.max_norm_increase);
    tail = tail && r.tail_converged;
  }
  const DaviesReport d = ac_subspace_check(waveguide(), 1.0, {2.0, 6.0}, 2);
  increase = std::max(increase, d.max_norm_increase);
  return {ratio <= 1.1 && tail && d.stable && increase <= 1e-10,
          "smoothing_ratio=" + num(ratio) + " davies_growth=" + num(d.growth) + " T=" + num(d.T) +
              " max_norm_increase=" + num(increase)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome c12_determinism() {
  const auto base = std::filesystem::temp_directory_path() / "dlap_acceptance_determinism";
  std::filesystem::remove_all(base);
  int codes[2];
  for (int k = 0; k < 2; ++k) {
    const std::string cmd = std::string(DLAP_CLI_PATH) + " check-all --config " + DLAP_SOURCE_DIR +
                            "/configs/default.cfg --out " + (base / std::to_string(k)).string() +
                            " > /dev/null 2>&1";
    codes[k] = std::system(cmd.c_str());
  }
  int files = 0, differing = 0;
  for (const auto& e : std::filesystem::directory_iterator(base / "0")) {
    ++files;
    const auto other = base / "1" / e.path().filename();
    if (!std::filesystem::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  const bool pass = codes[0] == 0 && codes[1] == 0 && files > 0 && differing == 0;
  return {pass, "files=" + std::to_string(files) + " differing=" + std::to_string(differing) +
                    " exit=" + std::to_string(codes[0]) + "," + std::to_string(codes[1])};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 oracle equivalence (delta1d Krein)", c1_oracle},
      {"2 Mourre certificate (waveguide)", c2_mourre},
      {"3 uniform LAP plateau", c3_lap},
      {"4 Holder fit", c4_holder},
      {"5 quadratic estimates", c5_quadratic},
      {"6 regularized family", c6_regularized},
      {"7 commutator identity and factored inverse", c7_identities},
      {"8 ODE bound", c8_ode},
      {"9 multiple commutators", c9_commutators},
      {"10 wave derivative", c10_wave},
      {"11 smoothing and AC statistic", c11_smoothing},
      {"12 determinism", c12_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
