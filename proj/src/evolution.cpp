#include "dlap/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "dlap/mourre.hpp"
#include "dlap/rng.hpp"

namespace dlap {

CayleyPropagator::CayleyPropagator(const CSparseMatrix& H, double dt, Direction dir) : dt_(dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be > 0");
  const CSparseMatrix g = dir == Direction::Forward ? H : cd(-1.0) * H.adjoint();
  const CSparseMatrix id = CSparseMatrix::identity(H.rows());
  const cd half(0.0, 0.5 * dt);
  lhs_ = factorize(id + half * g);
  rhs_ = id - half * g;
}

Vec CayleyPropagator::step(const Vec& u) const { return lhs_.solve(rhs_.apply(u)); }

WeightOperator identity_weight(Eigen::Index n) {
  return {Mat::Identity(n, n), Mat::Identity(n, n), "identity"};
}

WeightOperator zero_weight(Eigen::Index n) { return {Mat(n, 0), Mat(n, 0), "zero"}; }

WeightOperator cutoff_weight(const Setup& setup, double delta, const RealFunction& chi) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < setup.h0.size(); ++i)
    if (chi(setup.h0.values[i]) != 0.0) cols.push_back(i);
  const Eigen::Index r = static_cast<Eigen::Index>(cols.size());
  WeightOperator q;
  q.V.resize(setup.size(), r);
  q.G.resize(setup.size(), r);
  const Mat w = setup.conj.factor([delta](double l) { return std::pow(1.0 + l * l, -0.5 * delta); });
  for (Eigen::Index c = 0; c < r; ++c) {
    const Eigen::Index k = cols[static_cast<std::size_t>(c)];
    q.V.col(c) = setup.h0.vectors.col(k);
    q.G.col(c) = apply_x_factor(w, setup.conj.ny, Vec(setup.h0.vectors.col(k))) * chi(setup.h0.values[k]);
  }
  q.descriptor = "<A>^-" + std::to_string(delta).substr(0, 4) + " chi(H0)";
  return q;
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory evolve(const CSparseMatrix& H, const Vec& u0, double dt, double T,
                  const EvolveOptions& opts) {
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "T must be > 0");
  if (opts.sample_every < 1) throw Error(ErrorKind::InvalidArgument, "sample_every must be >= 1");
  const CayleyPropagator prop(H, dt, opts.direction);
  const int steps = static_cast<int>(std::llround(T / dt));
  Trajectory tr;
  Vec u = u0;
  auto sample = [&](int k) {
    TrajectorySample s;
    s.t = k * dt;
    s.norm = u.norm();
    if (opts.Q) s.Q_norm_sq = opts.Q->apply(u).squaredNorm();
    if (opts.probe) s.overlap = opts.probe->dot(u);  // Eigen conjugates the left factor
    tr.samples.push_back(s);
  };
  sample(0);
  double prev = u.norm();
  for (int k = 1; k <= steps; ++k) {
    u = prop.step(u);
    const double nrm = u.norm();
    tr.max_norm_increase = std::max(tr.max_norm_increase, nrm - prev);
    prev = nrm;
    if (k % opts.sample_every == 0 || k == steps) sample(k);
  }
  tr.steps = steps;
  tr.final_state = std::move(u);
  return tr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  const auto old = os.precision(10);
  os << "t,norm,Q_norm_sq,overlap_re,overlap_im\n";
  for (const auto& s : tr.samples)
    os << s.t << ',' << s.norm << ',' << s.Q_norm_sq << ',' << s.overlap.real() << ','
       << s.overlap.imag() << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Resolvent criterion

std::vector<cd> smoothing_z_grid(const Interval& range, const std::vector<double>& mus,
                                 int tau_count) {
  if (tau_count < 1 || mus.empty()) throw Error(ErrorKind::InvalidArgument, "empty z grid");
  std::vector<cd> zs;
  for (double mu : mus) {
    if (!(mu > 0.0)) throw Error(ErrorKind::NonPhysicalZ, "grid needs Im z > 0");
    for (int j = 0; j < tau_count; ++j) {
      const double t = tau_count == 1 ? 0.5 * (range.lo + range.hi)
                                      : range.lo + (range.hi - range.lo) * j / (tau_count - 1);
      zs.push_back({t, mu});
    }
  }
  return zs;
}

SmoothingConstant smoothing_constant(const CSparseMatrix& H, const WeightOperator& Q,
                                     const std::vector<cd>& zs, int probes, std::uint64_t seed,
                                     int threads) {
  SmoothingConstant out;
  out.z_count = static_cast<int>(zs.size());
  if (Q.rank() == 0 || zs.empty()) return out;
  // Nonzero spectrum of Q X Q* = G (V* X V) G* equals that of S^{1/2} K S^{1/2}, S = G*G.
  const Mat s = Q.G.adjoint() * Q.G;
  const EigDecomp se = hermitian_eig(0.5 * (s + s.adjoint()), 1e-6);
  const Mat s_half = matrix_function(se, [](double l) { return std::sqrt(std::max(l, 0.0)); });

  CounterRng rng(seed, "smoothing-probes");
  Mat coeffs(Q.rank(), probes);
  for (int p = 0; p < probes; ++p) {
    const Vec phi = rng.unit_vector(Q.size());
    coeffs.col(p) = Q.G.adjoint() * phi;
  }

  std::vector<double> top(zs.size(), 0.0), residue(zs.size(), 0.0);
  const CSparseMatrix id = CSparseMatrix::identity(H.rows());
  parallel_for(static_cast<int>(zs.size()), threads, [&](int k) {
    const cd z = zs[static_cast<std::size_t>(k)];
    const SolveHandle r = factorize(H - z * id);
    const Mat k_form = Q.V.adjoint() * (r.solve(Q.V) - r.solve_adjoint(Q.V)) / kI;
    const Mat m = s_half * k_form * s_half;
    top[static_cast<std::size_t>(k)] = hermitian_eig(0.5 * (m + m.adjoint()), 1e-6).values.maxCoeff();
    double res = 0.0;
    for (int p = 0; p < probes; ++p) {
      const cd f = coeffs.col(p).dot(k_form * coeffs.col(p));
      res = std::max(res, std::abs(f.imag()) / std::max(std::abs(f), std::numeric_limits<double>::min()));
    }
    residue[static_cast<std::size_t>(k)] = res;
  });
  for (std::size_t k = 0; k < zs.size(); ++k) {
    if (top[k] > out.C) {
      out.C = top[k];
      out.z_at_max = zs[k];
    }
    out.imaginary_residue = std::max(out.imaginary_residue, residue[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time integrals

namespace {

// Running trapezoid of |Q u(t)|^2, sampled every `every` steps.
struct QIntegral {
  const CayleyPropagator& prop;
  const WeightOperator& Q;
  Mat gram;
  Vec u;
  int every;
  double t = 0.0;
  double integral = 0.0;
  double last = 0.0;
  double max_norm_increase = 0.0;
  std::vector<double> history{0.0};  // integral at each sample time

  QIntegral(const CayleyPropagator& p, const WeightOperator& q, const Vec& u0, int e)
      : prop(p), Q(q), gram(q.G.adjoint() * q.G), u(u0), every(e) {
    last = value();
  }
  double value() const {
    if (Q.rank() == 0) return 0.0;
    const Vec c = Q.V.adjoint() * u;
    return std::max(0.0, c.dot(gram * c).real());
  }
  void advance_sample() {
    double prev = u.norm();
    for (int k = 0; k < every; ++k) {
      u = prop.step(u);
      const double nrm = u.norm();
      max_norm_increase = std::max(max_norm_increase, nrm - prev);
      prev = nrm;
    }
    const double next = value();
    integral += 0.5 * prop.dt() * every * (last + next);
    last = next;
    t += prop.dt() * every;
    history.push_back(integral);
  }
};

struct TailResult {
  double integral = 0.0;
  double T = 0.0;
  double max_norm_increase = 0.0;
  bool converged = false;
};

TailResult integrate_with_tail(const CSparseMatrix& H, const WeightOperator& Q, const Vec& psi,
                               const SmoothingOptions& o, Direction dir) {
  const CayleyPropagator prop(H, o.dt, dir);
  QIntegral acc(prop, Q, psi, o.sample_every);
  const double h = o.dt * o.sample_every;
  TailResult out;
  for (double T = o.T0; T <= o.T_cap * (1.0 + 1e-12); T *= 2.0) {
    const auto target = static_cast<std::size_t>(std::llround(T / h));
    while (acc.history.size() <= target) acc.advance_sample();
    const double half = acc.history[target / 2];
    out.integral = acc.history[target];
    out.T = T;
    if (out.integral == 0.0 || out.integral - half <= o.tail_fraction * out.integral) {
      out.converged = true;
      break;
    }
  }
  out.max_norm_increase = acc.max_norm_increase;
  return out;
}

}  // namespace

SmoothingReport smoothing_integral(const CSparseMatrix& H, const WeightOperator& Q, const Vec& psi,
                                   double C_resolvent, const SmoothingOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.T0 > 0.0) || opts.sample_every < 1)
    throw Error(ErrorKind::InvalidArgument, "smoothing integral needs dt > 0, T > 0");
  SmoothingReport r;
  r.Q_descriptor = Q.descriptor;
  r.C_resolvent = C_resolvent;
  r.dt = opts.dt;
  r.psi_norm_sq = psi.squaredNorm();
  const TailResult f = integrate_with_tail(H, Q, psi, opts, Direction::Forward);
  const TailResult a = integrate_with_tail(H, Q, psi, opts, Direction::Adjoint);
  r.integral_forward = f.integral;
  r.integral_adjoint = a.integral;
  r.T = std::max(f.T, a.T);
  r.max_norm_increase = std::max(f.max_norm_increase, a.max_norm_increase);
  r.tail_converged = f.converged && a.converged;
  auto ratio = [&](double integral) {
    const double bound = C_resolvent * r.psi_norm_sq;
    if (integral == 0.0) return 0.0;
    return bound > 0.0 ? integral / bound : std::numeric_limits<double>::infinity();
  };
  r.ratio = ratio(r.integral_forward);
  r.ratio_adjoint = ratio(r.integral_adjoint);
  if (opts.strict && !r.tail_converged)
    throw Error(ErrorKind::TailNotConverged, "smoothing integral tail above threshold at T cap");
  return r;
}

void write_smoothing_report(std::ostream& os, const SmoothingReport& r) {
  const auto old = os.precision(10);
  os << "Q_descriptor = " << r.Q_descriptor << "\nC_resolvent = " << r.C_resolvent
     << "\nintegral_forward = " << r.integral_forward
     << "\nintegral_adjoint = " << r.integral_adjoint << "\npsi_norm_sq = " << r.psi_norm_sq
     << "\nT = " << r.T << "\ndt = " << r.dt << "\nratio = " << r.ratio
     << "\nratio_adjoint = " << r.ratio_adjoint << "\nmax_norm_increase = " << r.max_norm_increase
     << "\ntail_converged = " << (r.tail_converged ? "true" : "false") << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Davies statistic

DaviesReport davies_statistic(const CSparseMatrix& H, const std::vector<Vec>& phis,
                              const DaviesOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.T0 > 0.0))
    throw Error(ErrorKind::InvalidArgument, "Davies statistic needs dt > 0, T > 0");
  const Eigen::Index n = H.rows();
  const CayleyPropagator prop(H, opts.dt, Direction::Forward);
  CounterRng rng(opts.seed, "davies-psi");
  Mat psi(n, opts.psi_probes);
  for (int p = 0; p < opts.psi_probes; ++p) psi.col(p) = rng.unit_vector(n);

  struct Track {
    Vec u;
    Mat probes;       // random probes plus phi / |phi|
    RVec integrals;   // per probe
    double norm_integral = 0.0;
    RVec last;
    double last_norm = 0.0;
    double max_increase = 0.0;
  };
  std::vector<Track> tracks(phis.size());
  for (std::size_t k = 0; k < phis.size(); ++k) {
    Track& tk = tracks[k];
    tk.u = phis[k];
    const double nrm = phis[k].norm();
    tk.probes.resize(n, opts.psi_probes + (nrm > 0.0 ? 1 : 0));
    tk.probes.leftCols(opts.psi_probes) = psi;
    if (nrm > 0.0) tk.probes.col(opts.psi_probes) = phis[k] / nrm;
    tk.integrals = RVec::Zero(tk.probes.cols());
    tk.last = (tk.probes.adjoint() * tk.u).cwiseAbs2();
    tk.last_norm = tk.u.squaredNorm();
  }
  auto advance = [&](int steps) {
    parallel_for(static_cast<int>(tracks.size()), opts.threads, [&](int k) {
      Track& tk = tracks[static_cast<std::size_t>(k)];
      double prev = std::sqrt(tk.last_norm);
      for (int s = 0; s < steps; ++s) {
        tk.u = prop.step(tk.u);
        const RVec next = (tk.probes.adjoint() * tk.u).cwiseAbs2();
        const double nsq = tk.u.squaredNorm();
        tk.integrals += 0.5 * opts.dt * (tk.last + next);
        tk.norm_integral += 0.5 * opts.dt * (tk.last_norm + nsq);
        tk.max_increase = std::max(tk.max_increase, std::sqrt(nsq) - prev);
        prev = std::sqrt(nsq);
        tk.last = next;
        tk.last_norm = nsq;
      }
    });
  };
  auto statistic = [&]() {
    double s = 0.0;
    for (const auto& tk : tracks)
      if (tk.integrals.size()) s = std::max(s, tk.integrals.maxCoeff());
    return s;
  };

  DaviesReport r;
  const int half_steps = static_cast<int>(std::llround(0.5 * opts.T0 / opts.dt));
  advance(half_steps);
  double previous = statistic();
  double T = opts.T0;
  int done = half_steps;
  for (;; T *= 2.0) {
    const int target = static_cast<int>(std::llround(T / opts.dt));
    advance(target - done);
    done = target;
    const double current = statistic();
    r.statistic = current;
    r.statistic_previous = previous;
    r.growth = previous > 0.0 ? current / previous - 1.0 : 0.0;
    r.T = T;
    r.stable = r.growth < opts.growth_tol;
    if (r.stable || T * 2.0 > opts.T_cap * (1.0 + 1e-12)) break;
    previous = current;
  }
  for (const auto& tk : tracks) {
    r.per_phi.push_back(tk.integrals.size() ? tk.integrals.maxCoeff() : 0.0);
    r.norm_integral = std::max(r.norm_integral, tk.norm_integral);
    r.max_norm_increase = std::max(r.max_norm_increase, tk.max_increase);
  }
  if (opts.strict && !r.stable)
    throw Error(ErrorKind::TailNotConverged, "Davies statistic still growing at T cap");
  return r;
}

DaviesReport ac_subspace_check(const Setup& setup, double delta, const Interval& J,
                               int zeta_probes, const DaviesOptions& opts) {
  if (!(delta > 0.5)) throw Error(ErrorKind::ParameterOutOfRange, "delta must be > 1/2");
  const Mat v = spectral_basis(setup.h0, J);
  const Mat w = setup.conj.factor([delta](double l) { return std::pow(1.0 + l * l, -0.5 * delta); });
  CounterRng rng(opts.seed, "davies-zeta");
  std::vector<Vec> phis;
  for (int k = 0; k < zeta_probes; ++k) {
    const Vec zeta = rng.unit_vector(setup.size());
    phis.push_back(v * (v.adjoint() * apply_x_factor(w, setup.conj.ny, zeta)));
  }
  return davies_statistic(setup.model.H(), phis, opts);
}

double weighted_cutoff_boundedness(const Setup& setup, double delta, const RealFunction& chi,
                                   int N) {
  if (std::abs(delta) > N) throw Error(ErrorKind::ParameterOutOfRange, "|delta| must be <= N");
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < setup.h0.size(); ++i)
    if (chi(setup.h0.values[i]) != 0.0) cols.push_back(i);
  if (cols.empty()) return 0.0;
  Mat vc(setup.size(), static_cast<Eigen::Index>(cols.size()));
  RVec d(vc.cols());
  for (Eigen::Index c = 0; c < vc.cols(); ++c) {
    const Eigen::Index k = cols[static_cast<std::size_t>(c)];
    vc.col(c) = setup.h0.vectors.col(k);
    d[c] = chi(setup.h0.values[k]);
  }
  const int ny = setup.conj.ny;
  const Mat wm = setup.conj.factor([delta](double l) { return std::pow(1.0 + l * l, -0.5 * delta); });
  const Mat wp = setup.conj.factor([delta](double l) { return std::pow(1.0 + l * l, 0.5 * delta); });
  const Mat& k = setup.k_plus;
  auto middle = [&](const Vec& x, bool adjoint) {
    const Vec y = apply_x_factor(adjoint ? wm : wp, ny, x);
    const Vec c = d.cast<cd>().asDiagonal() * (vc.adjoint() * y);
    return apply_x_factor(adjoint ? wp : wm, ny, Vec(vc * c));
  };
  return weighted_op_norm([&](const Vec& x) { return Vec(k * middle(Vec(k * x), false)); },
                          [&](const Vec& x) { return Vec(k * middle(Vec(k * x), true)); },
                          setup.size(), 1e-10, 5000)
      .value;
}

}  // namespace dlap
