#include "dlap/lap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "dlap/rng.hpp"

namespace dlap {

// ---------------------------------------------------------------------------
// Cutoff and regularized family

RealFunction phi_cutoff(const Interval& J, const Interval& I) {
  if (!(J.lo < I.lo && I.lo <= I.hi && I.hi < J.hi))
    throw Error(ErrorKind::BadNesting, "I must lie inside the interior of J");
  auto s = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  auto step = [s](double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return s(u) / (s(u) + s(1.0 - u));
  };
  return [J, I, step](double x) {
    return step((x - J.lo) / (I.lo - J.lo)) * step((J.hi - x) / (J.hi - I.hi));
  };
}

Mat RegularizedFamily::M0() const {
  const Mat h = 0.5 * (S + S.adjoint());
  return U * h * U.adjoint();
}

Mat RegularizedFamily::Phi() const {
  const Mat v = spectral_basis(setup->h0, J);
  RVec f(v.cols());
  const RVec lam = [&] {
    RVec out(v.cols());
    Eigen::Index c = 0;
    const RealFunction ind = interval_indicator(J.lo, J.hi);
    for (Eigen::Index i = 0; i < setup->h0.size(); ++i)
      if (ind(setup->h0.values[i]) > 0.5) out[c++] = setup->h0.values[i];
    return out;
  }();
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = phi(lam[i]);
  return v * f.cast<cd>().asDiagonal() * v.adjoint();
}

RegularizedFamily make_regularized_family(const Setup& setup, const Interval& J,
                                          const Interval& I, double beta, double alpha) {
  RegularizedFamily F;
  F.setup = &setup;
  F.J = J;
  F.I = I;
  F.beta = beta;
  F.alpha = alpha;
  F.phi = phi_cutoff(J, I);
  F.B = form_chain(setup.model, 1).B[1];

  std::vector<Eigen::Index> cols;
  std::vector<double> fv;
  for (Eigen::Index i = 0; i < setup.h0.size(); ++i) {
    const double f = F.phi(setup.h0.values[i]);
    if (f > 0.0) {
      cols.push_back(i);
      fv.push_back(f);
    }
  }
  const Eigen::Index r = static_cast<Eigen::Index>(cols.size());
  F.U.resize(setup.size(), r);
  RVec d(r);
  for (Eigen::Index c = 0; c < r; ++c) {
    F.U.col(c) = setup.h0.vectors.col(cols[static_cast<std::size_t>(c)]);
    d[c] = fv[static_cast<std::size_t>(c)];
  }
  const CSparseMatrix x = F.B + cd(beta) * setup.model.dissipative();
  const Mat core = F.U.adjoint() * (x.matrix() * F.U);
  F.S = d.cast<cd>().asDiagonal() * core * d.cast<cd>().asDiagonal();
  return F;
}

SolveHandle resolvent(const DissipativeModel& model, cd z, ResolventOf which) {
  CSparseMatrix x;
  switch (which) {
    case ResolventOf::H: x = model.H(); break;
    case ResolventOf::H0: x = model.H0; break;
    case ResolventOf::HAdjoint: x = model.H().adjoint(); break;
  }
  return factorize(x - z * CSparseMatrix::identity(model.size()));
}

SolveHandle regularized_resolvent(const RegularizedFamily& F, cd z, double eps,
                                  double* contraction) {
  if (eps < 0.0) throw Error(ErrorKind::InvalidArgument, "eps must be >= 0");
  if (!(z.imag() > 0.0) && !(eps > 0.0))
    throw Error(ErrorKind::NonPhysicalZ, "G_z(0) needs Im z > 0");
  const DissipativeModel& m = F.setup->model;
  if (eps == 0.0 || F.U.cols() == 0) {
    if (contraction) *contraction = 0.0;
    return resolvent(m, z);
  }
  SolveHandle t;
  try {
    t = resolvent(m, z);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularMatrix) throw;
    // Real z can hit the spectrum of H itself; factor the full dense matrix instead.
    const Mat full = m.H().dense() - cd(0.0, eps) * F.M() - z * Mat::Identity(m.size(), m.size());
    if (contraction) *contraction = std::numeric_limits<double>::quiet_NaN();
    return factorize(full);
  }
  const Mat p1 = cd(0.0, -eps) * (F.U * F.S);
  const Mat p2 = F.U.adjoint();
  FactoredInverse fi = factored_inverse(t, p1, p2);
  if (contraction) *contraction = fi.contraction;
  return fi.handle;
}

// ---------------------------------------------------------------------------
// Weighted norms and sweeps

namespace {

Mat bracket_factor(const ConjugateOperator& conj, double power, int halfline = 0) {
  // <A>^{power} times an optional half-line indicator (+1: [0, inf), -1: (-inf, 0)).
  return conj.factor([power, halfline](double l) {
    double ind = 1.0;
    if (halfline > 0) ind = l >= 0.0 ? 1.0 : 0.0;
    if (halfline < 0) ind = l < 0.0 ? 1.0 : 0.0;
    return ind * std::pow(1.0 + l * l, 0.5 * power);
  });
}

OpNormResult sandwiched_norm(const Setup& setup, const Mat& left, const Mat& right,
                             const SolveHandle& r, std::uint64_t seed, double tol = 1e-9) {
  const int ny = setup.conj.ny;
  const Mat left_adj = left.adjoint(), right_adj = right.adjoint();
  return weighted_op_norm(
      [&](const Vec& v) { return apply_x_factor(left, ny, r.solve(apply_x_factor(right, ny, v))); },
      [&](const Vec& v) {
        return apply_x_factor(right_adj, ny, r.solve_adjoint(apply_x_factor(left_adj, ny, v)));
      },
      setup.size(), tol, 5000, seed);
}

}  // namespace

OpNormResult weighted_resolvent_norm(const Setup& setup, double delta, cd z, ResolventOf which,
                                     std::uint64_t seed) {
  if (!(z.imag() > 0.0) && which != ResolventOf::HAdjoint)
    throw Error(ErrorKind::NonPhysicalZ, "weighted resolvent needs Im z > 0");
  const Mat w = bracket_factor(setup.conj, -delta);
  return sandwiched_norm(setup, w, w, resolvent(setup.model, z, which), seed);
}

std::pair<double, double> trimmed_line_fit(const std::vector<double>& x,
                                           const std::vector<double>& y, double trim) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorKind::TooFewSamples, "line fit needs two points");
  auto fit = [](const std::vector<std::size_t>& idx, const std::vector<double>& xs,
                const std::vector<double>& ys) {
    double mx = 0.0, my = 0.0;
    for (auto i : idx) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxx = 0.0, sxy = 0.0;
    for (auto i : idx) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw Error(ErrorKind::TooFewSamples, "line fit needs distinct abscissae");
    const double b = sxy / sxx;
    return std::make_pair(b, my - b * mx);
  };
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), 0);
  auto [b, a] = fit(all, x, y);
  const std::size_t drop = static_cast<std::size_t>(std::floor(trim * static_cast<double>(x.size())));
  if (drop == 0 || x.size() - 2 * drop < 2) return {b, a};
  std::vector<std::size_t> order = all;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return y[i] - (a + b * x[i]) < y[j] - (a + b * x[j]);
  });
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop),
                                order.end() - static_cast<std::ptrdiff_t>(drop));
  return fit(kept, x, y);
}

std::vector<std::pair<double, double>> geometric_pairs(const std::vector<double>& centers,
                                                       double d_max, double ratio, int count) {
  std::vector<std::pair<double, double>> out;
  for (double c : centers) {
    double d = d_max;
    for (int k = 0; k < count; ++k, d *= ratio) out.push_back({c, c + d});
  }
  return out;
}

HolderFit holder_fit(const Setup& setup, double delta, double mu,
                     const std::vector<std::pair<double, double>>& pairs, std::uint64_t seed) {
  HolderFit out;
  if (pairs.size() < 3) throw Error(ErrorKind::TooFewSamples, "Hölder fit needs three pairs");
  const Mat w = bracket_factor(setup.conj, -delta);
  const int ny = setup.conj.ny;
  std::map<double, SolveHandle> cache;
  auto handle = [&](double tau) -> const SolveHandle& {
    auto it = cache.find(tau);
    if (it == cache.end()) it = cache.emplace(tau, resolvent(setup.model, cd(tau, mu))).first;
    return it->second;
  };
  std::vector<double> lx, ly;
  for (const auto& [t1, t2] : pairs) {
    const SolveHandle& r1 = handle(t1);
    const SolveHandle& r2 = handle(t2);
    const double diff =
        weighted_op_norm(
            [&](const Vec& v) {
              const Vec u = apply_x_factor(w, ny, v);
              return apply_x_factor(w, ny, Vec(r1.solve(u) - r2.solve(u)));
            },
            [&](const Vec& v) {
              const Vec u = apply_x_factor(w, ny, v);
              return apply_x_factor(w, ny, Vec(r1.solve_adjoint(u) - r2.solve_adjoint(u)));
            },
            setup.size(), 1e-9, 5000, seed)
            .value;
    out.spacing.push_back(std::abs(t2 - t1));
    out.difference.push_back(diff);
    if (diff > 0.0 && t1 != t2) {
      lx.push_back(std::log(std::abs(t2 - t1)));
      ly.push_back(std::log(diff));
    }
  }
  const auto [slope, intercept] = trimmed_line_fit(lx, ly, 0.1);
  out.exponent = slope;
  out.log_constant = intercept;
  out.pairs_used = static_cast<int>(lx.size());
  return out;
}

LapSweep lap_sweep(const Setup& setup, double delta, const Interval& I,
                   const std::vector<double>& mu_grid, const std::vector<double>& tau_grid,
                   const SweepOptions& opts) {
  if (mu_grid.empty() || tau_grid.empty())
    throw Error(ErrorKind::InvalidArgument, "sweep grids must be nonempty");
  for (std::size_t k = 1; k < mu_grid.size(); ++k)
    if (!(mu_grid[k] < mu_grid[k - 1]))
      throw Error(ErrorKind::InvalidArgument, "mu grid must be strictly decreasing");
  LapSweep s;
  s.I = I;
  s.delta = delta;
  s.mu_grid = mu_grid;
  s.tau_grid = tau_grid;
  s.holder_expected = (2.0 * delta - 1.0) / (2.0 * delta + 1.0);
  const int nm = static_cast<int>(mu_grid.size()), nt = static_cast<int>(tau_grid.size());
  s.norms = Eigen::MatrixXd::Zero(nm, nt);
  std::vector<char> conv(static_cast<std::size_t>(nm * nt), 1);
  const Mat w = bracket_factor(setup.conj, -delta);
  parallel_for(nm * nt, opts.threads, [&](int k) {
    const int i = k / nt, j = k % nt;
    const cd z(tau_grid[static_cast<std::size_t>(j)], mu_grid[static_cast<std::size_t>(i)]);
    const OpNormResult r =
        sandwiched_norm(setup, w, w, resolvent(setup.model, z, opts.which), opts.seed);
    s.norms(i, j) = r.value;
    conv[static_cast<std::size_t>(k)] = r.converged ? 1 : 0;
  });
  s.converged = std::all_of(conv.begin(), conv.end(), [](char c) { return c != 0; });
  for (int i = 0; i < nm; ++i) s.column_max.push_back(s.norms.row(i).maxCoeff());
  const int tail = std::min(3, nm);
  const auto first = s.column_max.end() - tail;
  const double hi = *std::max_element(first, s.column_max.end());
  const double lo = *std::min_element(first, s.column_max.end());
  s.plateau_ratio = hi / lo;
  s.non_plateau = s.plateau_ratio > opts.plateau_bound;

  if (opts.fit_holder && nt >= 3) {
    std::vector<std::pair<double, double>> pairs;
    for (int a = 0; a < nt; ++a)
      for (int b = a + 1; b < nt; ++b)
        pairs.push_back({tau_grid[static_cast<std::size_t>(a)], tau_grid[static_cast<std::size_t>(b)]});
    s.holder_fit = holder_fit(setup, delta, mu_grid.back(), pairs, opts.seed).exponent;
  } else {
    s.holder_fit = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

void write_sweep_csv(std::ostream& os, const LapSweep& s, const std::string& model_id,
                     bool header) {
  const auto old = os.precision(10);
  if (header) os << "tau,mu,norm,delta,model_id\n";
  for (std::size_t i = 0; i < s.mu_grid.size(); ++i)
    for (std::size_t j = 0; j < s.tau_grid.size(); ++j)
      os << s.tau_grid[j] << ',' << s.mu_grid[i] << ','
         << s.norms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ',' << s.delta
         << ',' << model_id << '\n';
  os.precision(old);
}

void write_sweep_summary(std::ostream& os, const LapSweep& s, double plateau_bound) {
  const auto old = os.precision(10);
  const bool pass = s.plateau_ratio <= plateau_bound &&
                    (!(s.holder_fit == s.holder_fit) || s.holder_fit >= s.holder_expected - 0.15);
  os << "plateau_ratio = " << s.plateau_ratio << "\nholder_fit = " << s.holder_fit
     << "\nholder_expected = " << s.holder_expected
     << "\nconverged = " << (s.converged ? "true" : "false")
     << "\npass = " << (pass ? "true" : "false") << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Quadratic estimates and commutator identities

QuadraticEstimate quadratic_estimate_check(const DissipativeModel& model, cd z, int probes,
                                           std::uint64_t seed) {
  if (!(z.imag() > 0.0)) throw Error(ErrorKind::NonPhysicalZ, "quadratic estimate needs Im z > 0");
  QuadraticEstimate q;
  q.probes = probes;
  const CSparseMatrix theta = model.dissipative();
  const SolveHandle r = resolvent(model, z, ResolventOf::H);
  const SolveHandle ra = resolvent(model, std::conj(z), ResolventOf::HAdjoint);
  CounterRng rng(seed, "quadratic-estimate");
  q.max_violation = q.max_violation_adjoint = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < probes; ++p) {
    const Vec phi = rng.unit_vector(model.size());
    for (int variant = 0; variant < 2; ++variant) {
      const Vec u = variant == 0 ? r.solve(phi) : ra.solve(phi);
      const double gamma = u.dot(theta.apply(u)).real();
      const double rhs = std::abs(phi.dot(u));
      const double scale = std::max({gamma, rhs, std::numeric_limits<double>::min()});
      double& slot = variant == 0 ? q.max_violation : q.max_violation_adjoint;
      slot = std::max(slot, (gamma - rhs) / scale);
    }
  }
  if (probes == 0) q.max_violation = q.max_violation_adjoint = 0.0;
  return q;
}

IdentityResidual gmag_identity_residual(const RegularizedFamily& F, cd z, double eps, int probes,
                                        std::uint64_t seed) {
  const Setup& setup = *F.setup;
  const SolveHandle g = regularized_resolvent(F, z, eps);
  const CSparseMatrix b = ad_chain(setup.model, setup.conj, 1).B[1];
  const CSparseMatrix& a = setup.conj.A;
  CounterRng rng(seed, "gmag-identity");
  IdentityResidual out;
  for (int p = 0; p < probes; ++p) {
    const Vec v = rng.unit_vector(setup.size());
    const Vec gv = g.solve(v);
    const Vec t1 = g.solve(b.apply(gv));
    const Vec t2 = cd(0.0, 1.0) * (a.apply(gv) - g.solve(a.apply(v)));
    const Vec comm = F.apply_M(a.apply(gv)) - a.apply(F.apply_M(gv));
    const Vec t3 = eps * g.solve(comm);
    out.residual = std::max(out.residual, (t1 - t2 + t3).norm());
    out.scale = std::max(out.scale, t1.norm() + t2.norm() + t3.norm());
  }
  return out;
}

double commutator_MA_norm(const RegularizedFamily& F) {
  const CSparseMatrix& a = F.setup->conj.A;
  return F.setup->kstark_norm(
      [&](const Vec& v) { return Vec(F.apply_M(a.apply(v)) - a.apply(F.apply_M(v))); },
      [&](const Vec& v) { return Vec(a.apply(F.apply_M_adjoint(v)) - F.apply_M_adjoint(a.apply(v))); });
}

double regularized_norm(const RegularizedFamily& F, cd z, double eps, double tol) {
  const SolveHandle g = regularized_resolvent(F, z, eps);
  const Mat& k = F.setup->k_plus;
  return lanczos_op_norm([&](const Vec& v) { return Vec(k * g.solve(Vec(k * v))); },
                         [&](const Vec& v) { return Vec(k * g.solve_adjoint(Vec(k * v))); },
                         F.size(), tol, 300)
      .value;
}

double find_eps0(const RegularizedFamily& F, const std::vector<cd>& zs, double eps_max) {
  double eps = eps_max;
  for (int k = 0; k < 40; ++k, eps *= 0.5) {
    bool ok = true;
    for (const cd& z : zs) {
      try {
        regularized_resolvent(F, z, eps);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularMatrix && e.kind() != ErrorKind::GammaSingular) throw;
        ok = false;
        break;
      }
    }
    if (ok) return eps;
  }
  throw Error(ErrorKind::NotInvertible, "no admissible eps found");
}

EpsScan regularized_scan(const RegularizedFamily& F, const std::vector<cd>& zs,
                         const std::vector<double>& eps) {
  EpsScan s;
  s.eps = eps;
  s.zs = zs;
  s.scaled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eps.size()),
                                   static_cast<Eigen::Index>(zs.size()));
  for (std::size_t i = 0; i < eps.size(); ++i)
    for (std::size_t j = 0; j < zs.size(); ++j)
      s.scaled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          eps[i] * regularized_norm(F, zs[j], eps[i], 1e-7);
  s.ratio = s.scaled.maxCoeff() / s.scaled.minCoeff();
  s.eps0 = eps.empty() ? 0.0 : *std::max_element(eps.begin(), eps.end());
  return s;
}

// ---------------------------------------------------------------------------
// Differential inequality

namespace {

double block_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

}  // namespace

OdeFit ode_bound_check(const std::vector<OdeSample>& samples_in, double g1, double g2, double g3,
                       double slack) {
  if (samples_in.size() < 8) throw Error(ErrorKind::TooFewSamples, "need at least 8 samples");
  std::vector<OdeSample> samples = samples_in;
  std::stable_sort(samples.begin(), samples.end(),
                   [](const OdeSample& a, const OdeSample& b) { return a.eps > b.eps; });
  OdeFit fit;
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double e0 = samples[k].eps, e1 = samples[k + 1].eps;
    if (!(e0 > e1)) throw Error(ErrorKind::InvalidArgument, "eps grid must be strictly decreasing");
    const double deriv = block_norm(samples[k + 1].value - samples[k].value) / (e0 - e1);
    const double emid = std::sqrt(e0 * e1);
    const double fmid = block_norm(0.5 * (samples[k].value + samples[k + 1].value));
    ratios.push_back(deriv * std::pow(emid, g2) / (1.0 + std::pow(fmid, g1)));
  }
  // Calibrate c1 as the envelope of the coarse three quarters; the finest quarter
  // is the prediction, where a faster blow-up than eps^{-g2} would show.
  const std::size_t tail = std::max<std::size_t>(2, ratios.size() / 4);
  const std::size_t calib = ratios.size() - tail;
  fit.c1 = *std::max_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(calib));
  fit.intervals = static_cast<int>(ratios.size() - calib);
  for (std::size_t k = calib; k < ratios.size(); ++k)
    if (ratios[k] > slack * fit.c1) ++fit.violations;
  fit.violation_fraction =
      fit.intervals > 0 ? static_cast<double>(fit.violations) / fit.intervals : 0.0;
  fit.pass = fit.violation_fraction <= 0.1;
  fit.ratios = ratios;

  for (const auto& s : samples) fit.c2 = std::max(fit.c2, block_norm(s.value) * std::pow(s.eps, g3));
  return fit;
}

Mat interpolating_weight(const ConjugateOperator& conj, double delta, double eps) {
  return conj.factor([delta, eps](double l) {
    return std::pow(1.0 + l * l, -0.5 * delta) * std::pow(1.0 + eps * eps * l * l, 0.5 * (delta - 1.0));
  });
}

std::vector<OdeSample> sample_F(const RegularizedFamily& F, double delta, cd z,
                                const std::vector<double>& eps, int columns,
                                std::uint64_t seed) {
  const Setup& setup = *F.setup;
  CounterRng rng(seed, "ode-probe-block");
  Mat p(setup.size(), columns);
  for (int c = 0; c < columns; ++c) p.col(c) = rng.unit_vector(setup.size());
  std::vector<OdeSample> out;
  for (double e : eps) {
    const SolveHandle g = regularized_resolvent(F, z, e);
    const Mat q = interpolating_weight(setup.conj, delta, e);
    Mat value(setup.size(), columns);
    for (int c = 0; c < columns; ++c)
      value.col(c) = apply_x_factor(q, setup.conj.ny,
                                    g.solve(apply_x_factor(q, setup.conj.ny, Vec(p.col(c)))));
    out.push_back({e, std::move(value)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multiple commutators

CSparseMatrix cn_operator(const DissipativeModel& model, const CommutatorChain& chain, int n,
                          double eps, cd z) {
  if (n < 1 || static_cast<std::size_t>(n) >= chain.B.size())
    throw Error(ErrorKind::OrderTooLarge, "chain too short for C_" + std::to_string(n));
  CSparseMatrix x = model.H() - z * CSparseMatrix::identity(model.size());
  cd coeff(1.0, 0.0);
  for (int j = 1; j <= n; ++j) {
    coeff *= cd(0.0, -eps) / static_cast<double>(j);
    x = x + coeff * chain.B[static_cast<std::size_t>(j)];
  }
  return x;
}

CnFamily cn_family(const Setup& setup, const CommutatorChain& chain, int N, double eps, cd z,
                   double fd_step, int probes, std::uint64_t seed) {
  if (N < 1 || static_cast<std::size_t>(N + 1) >= chain.B.size())
    throw Error(ErrorKind::OrderTooLarge, "chain must reach order N + 1");
  CnFamily f;
  f.eps = eps;
  f.z = z;
  const Mat& k = setup.k_plus;
  const Mat w = bracket_factor(setup.conj, -1.0);
  const CSparseMatrix& a = setup.conj.A;
  const int ny = setup.conj.ny;
  for (int n = 1; n <= N; ++n) {
    SolveHandle g;
    try {
      g = factorize(cn_operator(setup.model, chain, n, eps, z));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SingularMatrix)
        throw Error(ErrorKind::NotInvertible, "G^" + std::to_string(n) + " not invertible at eps");
      throw;
    }
    f.G.push_back(g);
    f.norm_G.push_back(lanczos_op_norm([&](const Vec& v) { return Vec(k * g.solve(Vec(k * v))); },
                                       [&](const Vec& v) { return Vec(k * g.solve_adjoint(Vec(k * v))); },
                                       setup.size(), 1e-8, 300, seed)
                           .value);
    f.norm_G_weighted.push_back(
        lanczos_op_norm([&](const Vec& v) { return Vec(k * g.solve(apply_x_factor(w, ny, v))); },
                        [&](const Vec& v) { return apply_x_factor(w, ny, g.solve_adjoint(Vec(k * v))); },
                        setup.size(), 1e-8, 300, seed)
            .value);

    const SolveHandle gp = factorize(cn_operator(setup.model, chain, n, eps + fd_step, z));
    const SolveHandle gm = factorize(cn_operator(setup.model, chain, n, eps - fd_step, z));
    cd coeff(1.0, 0.0);
    for (int j = 1; j <= n; ++j) coeff *= cd(0.0, -eps) / static_cast<double>(j);
    const CSparseMatrix& bn1 = chain.B[static_cast<std::size_t>(n + 1)];
    CounterRng rng(seed, "cn-derivative");
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
      const Vec v = rng.unit_vector(setup.size());
      const Vec fd = (gp.solve(v) - gm.solve(v)) / (2.0 * fd_step);
      const Vec gv = g.solve(v);
      const Vec rhs = g.solve(a.apply(v)) - a.apply(gv) - cd(0.0, 1.0) * coeff * g.solve(bn1.apply(gv));
      worst = std::max(worst, (fd - rhs).norm() / rhs.norm());
    }
    f.derivative_residual.push_back(worst);
  }
  return f;
}

double find_eps_N(const DissipativeModel& model, const CommutatorChain& chain, int N,
                  const std::vector<cd>& zs, double eps_max, int steps) {
  auto ok = [&](double eps) {
    for (int n = 1; n <= N; ++n)
      for (const cd& z : zs) {
        try {
          factorize(cn_operator(model, chain, n, eps, z));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::SingularMatrix) throw;
          return false;
        }
      }
    return true;
  };
  if (ok(eps_max)) return eps_max;
  double lo = 0.0, hi = eps_max;
  for (int s = 0; s < steps; ++s) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  if (lo == 0.0) throw Error(ErrorKind::NotInvertible, "no admissible eps_N");
  return lo;
}

// ---------------------------------------------------------------------------
// Inserted factors

namespace {

struct ChainApply {
  const std::vector<Mat>& factors;
  const SolveHandle& r;

  Vec apply(const Vec& v) const {
    const std::size_t n = factors.size() - 1;
    Vec w = factors[n].size() ? Vec(factors[n] * v) : v;
    for (std::size_t j = n; j-- > 0;) {
      w = r.solve(w);
      if (factors[j].size()) w = factors[j] * w;
    }
    return w;
  }
  Vec apply_adjoint(const Vec& v) const {
    const std::size_t n = factors.size() - 1;
    Vec w = factors[0].size() ? Vec(factors[0].adjoint() * v) : v;
    for (std::size_t j = 1; j <= n; ++j) {
      w = r.solve_adjoint(w);
      if (factors[j].size()) w = factors[j].adjoint() * w;
    }
    return w;
  }
};

double chain_norm(const Setup& setup, const ChainApply& c, const Mat& left, const Mat& right,
                  std::uint64_t seed) {
  const int ny = setup.conj.ny;
  const Mat la = left.adjoint(), ra = right.adjoint();
  return weighted_op_norm(
             [&](const Vec& v) { return apply_x_factor(left, ny, c.apply(apply_x_factor(right, ny, v))); },
             [&](const Vec& v) { return apply_x_factor(ra, ny, c.apply_adjoint(apply_x_factor(la, ny, v))); },
             setup.size(), 1e-9, 5000, seed)
      .value;
}

}  // namespace

InsertionNorms insertion_norms(const Setup& setup, const std::vector<Mat>& factors, cd z,
                               double delta, double delta1, double delta2, int N,
                               std::uint64_t seed) {
  if (factors.size() < 2) throw Error(ErrorKind::ParameterOutOfRange, "need factors Phi_0..Phi_n, n >= 1");
  const int n = static_cast<int>(factors.size()) - 1;
  if (n > 3) throw Error(ErrorKind::ParameterOutOfRange, "n must be <= 3");
  if (!(delta > n - 0.5 && delta < N))
    throw Error(ErrorKind::ParameterOutOfRange, "delta must lie in (n - 1/2, N)");
  if (delta1 < 0.0 || delta2 < 0.0 || !(delta1 + delta2 < N - n))
    throw Error(ErrorKind::ParameterOutOfRange, "delta1 + delta2 must be < N - n");
  const SolveHandle r = resolvent(setup.model, z);
  const ChainApply c{factors, r};
  const ConjugateOperator& a = setup.conj;
  InsertionNorms out;
  const Mat wd = bracket_factor(a, -delta);
  out.symmetric = chain_norm(setup, c, wd, wd, seed);
  out.left = chain_norm(setup, c, bracket_factor(a, delta - n, -1), wd, seed);
  out.right = chain_norm(setup, c, wd, bracket_factor(a, delta - n, +1), seed);
  out.mixed = chain_norm(setup, c, bracket_factor(a, delta1, -1), bracket_factor(a, delta2, +1), seed);
  return out;
}

double unweighted_insertion_norm(const Setup& setup, int n, cd z, ResolventOf which,
                                 std::uint64_t seed) {
  const SolveHandle r = resolvent(setup.model, z, which);
  const std::vector<Mat> factors(static_cast<std::size_t>(n + 1));
  const ChainApply c{factors, r};
  return weighted_op_norm([&](const Vec& v) { return c.apply(v); },
                          [&](const Vec& v) { return c.apply_adjoint(v); }, setup.size(), 1e-9,
                          5000, seed)
      .value;
}

// ---------------------------------------------------------------------------
// Wave resolvent

double wave_derivative_check(const DissipativeModel& model, cd z, double h, int probes,
                             std::uint64_t seed) {
  if (!(z.imag() > 0.0)) throw Error(ErrorKind::NonPhysicalZ, "wave resolvent needs Im z > 0");
  const CSparseMatrix theta = model.dissipative();
  const CSparseMatrix id = CSparseMatrix::identity(model.size());
  auto wave = [&](cd s) {
    return factorize(model.H0 - cd(0.0, 1.0) * s * theta - (s * s) * id);
  };
  const SolveHandle r = wave(z), rp = wave(z + h), rm = wave(z - h);
  CounterRng rng(seed, "wave-derivative");
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Vec v = rng.unit_vector(model.size());
    const Vec fd = (rp.solve(v) - rm.solve(v)) / (2.0 * h);
    const Vec rv = r.solve(v);
    const Vec exact = r.solve(Vec(cd(0.0, 1.0) * theta.apply(rv) + 2.0 * z * rv));
    worst = std::max(worst, (fd - exact).norm() / exact.norm());
  }
  return worst;
}

}  // namespace dlap
