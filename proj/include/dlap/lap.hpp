// Limiting absorption engine: regularized resolvent family, weighted norm
// sweeps with plateau and Hölder statistics, quadratic estimates, commutator
// identities, the differential-inequality check, multiple commutators,
// inserted-factor norms and the wave-resolvent derivative.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlap/config.hpp"
#include "dlap/conjugate.hpp"
#include "dlap/mourre.hpp"

namespace dlap {

// Smooth plateau bump: 1 on I, 0 outside J, built from exp(-1/t).
RealFunction phi_cutoff(const Interval& J, const Interval& I);

// M = Phi (B + beta Theta) Phi with Phi = phi(H0), stored as U S U* where U
// spans Ran 1_J(H0).
struct RegularizedFamily {
  const Setup* setup = nullptr;
  Interval J, I;
  double beta = 0.0;
  double alpha = 0.0;
  RealFunction phi;
  Mat U;  // n x r orthonormal columns
  Mat S;  // r x r
  CSparseMatrix B;  // form-level first commutator

  Eigen::Index size() const { return U.rows(); }
  Vec apply_M(const Vec& v) const { return U * (S * (U.adjoint() * v)); }
  Vec apply_M_adjoint(const Vec& v) const { return U * (S.adjoint() * (U.adjoint() * v)); }
  Mat M() const { return U * S * U.adjoint(); }
  Mat M0() const;  // Hermitian part
  Mat Phi() const;
};

RegularizedFamily make_regularized_family(const Setup& setup, const Interval& J,
                                          const Interval& I, double beta, double alpha);

// Handle for G_z(eps) = (H - i eps M - z)^{-1}. The low-rank part is added
// through the factored inverse; contraction is reported via `contraction`.
SolveHandle regularized_resolvent(const RegularizedFamily& F, cd z, double eps,
                                  double* contraction = nullptr);

enum class ResolventOf { H, H0, HAdjoint };

// Sparse solve handle for (X - z) with X in {H, H0, H*}.
SolveHandle resolvent(const DissipativeModel& model, cd z, ResolventOf which = ResolventOf::H);

// |<A>^{-delta} (X - z)^{-1} <A>^{-delta}| with X chosen by `which`.
OpNormResult weighted_resolvent_norm(const Setup& setup, double delta, cd z,
                                     ResolventOf which = ResolventOf::H,
                                     std::uint64_t seed = kDefaultSeed);

struct LapSweep {
  Interval I;
  double delta = 1.0;
  std::vector<double> mu_grid;
  std::vector<double> tau_grid;
  Eigen::MatrixXd norms;  // mu index x tau index
  std::vector<double> column_max;  // max over tau per mu
  double plateau_ratio = 0.0;
  bool non_plateau = false;
  double holder_fit = 0.0;
  double holder_expected = 0.0;
  bool converged = true;
};

struct SweepOptions {
  double plateau_bound = 1.5;
  ResolventOf which = ResolventOf::H;
  bool fit_holder = true;
  int threads = 1;
  std::uint64_t seed = kDefaultSeed;
};

LapSweep lap_sweep(const Setup& setup, double delta, const Interval& I,
                   const std::vector<double>& mu_grid, const std::vector<double>& tau_grid,
                   const SweepOptions& opts = {});

void write_sweep_csv(std::ostream& os, const LapSweep& s, const std::string& model_id,
                     bool header = true);
void write_sweep_summary(std::ostream& os, const LapSweep& s, double plateau_bound);

struct HolderFit {
  double exponent = 0.0;
  double log_constant = 0.0;
  int pairs_used = 0;
  std::vector<double> spacing;
  std::vector<double> difference;
};

// Log-log regression of |F(tau) - F(tau')| against |tau - tau'| at Im z = mu,
// F = <A>^{-delta} (H - z)^{-1} <A>^{-delta}; 10% trimming of residuals.
HolderFit holder_fit(const Setup& setup, double delta, double mu,
                     const std::vector<std::pair<double, double>>& pairs,
                     std::uint64_t seed = kDefaultSeed);

// Pairs (c, c + d_k) with geometric d_k = d_max * ratio^k at each center.
std::vector<std::pair<double, double>> geometric_pairs(const std::vector<double>& centers,
                                                       double d_max, double ratio, int count);

// Least-squares line through (x, y) with symmetric trimming of residuals.
std::pair<double, double> trimmed_line_fit(const std::vector<double>& x,
                                           const std::vector<double>& y, double trim = 0.1);

struct QuadraticEstimate {
  double max_violation = 0.0;          // max of (gamma(R phi) - |<R phi, phi>|) / scale
  double max_violation_adjoint = 0.0;  // same with (H* - conj z)^{-1}
  int probes = 0;
};

QuadraticEstimate quadratic_estimate_check(const DissipativeModel& model, cd z, int probes,
                                           std::uint64_t seed = kDefaultSeed);

struct IdentityResidual {
  double residual = 0.0;  // max absolute residual over probes
  double scale = 0.0;     // max over probes of the sum of term norms
  double relative() const { return scale > 0.0 ? residual / scale : residual; }
};

// G B G - i (A G - G A) + eps G [M, A] G on random probes, B the matrix commutator.
IdentityResidual gmag_identity_residual(const RegularizedFamily& F, cd z, double eps,
                                        int probes = 20, std::uint64_t seed = kDefaultSeed);

// |(H0+1)^{1/2} [M, A] (H0+1)^{1/2}|
double commutator_MA_norm(const RegularizedFamily& F);

// K* -> K surrogate |(H0+1)^{1/2} G_z(eps) (H0+1)^{1/2}|
double regularized_norm(const RegularizedFamily& F, cd z, double eps, double tol = 1e-8);

// Largest eps in (0, eps_max] at which every z in the list factors, by halving.
double find_eps0(const RegularizedFamily& F, const std::vector<cd>& zs, double eps_max);

struct EpsScan {
  std::vector<double> eps;
  std::vector<cd> zs;
  Eigen::MatrixXd scaled;  // eps * |G_z(eps)|, eps index x z index
  double ratio = 0.0;      // max / min
  double eps0 = 0.0;
};

EpsScan regularized_scan(const RegularizedFamily& F, const std::vector<cd>& zs,
                         const std::vector<double>& eps);

struct OdeSample {
  double eps;
  Mat value;
};

struct OdeFit {
  double c1 = 0.0;
  double c2 = 0.0;
  int violations = 0;
  int intervals = 0;
  double violation_fraction = 0.0;
  bool pass = false;
  std::vector<double> ratios;  // per interval, coarse to fine
};

// Checks |f'| <= c1 eps^{-g2} (1 + |f|^{g1}) and records c2 = max |f| eps^{g3}.
// c1 is the largest ratio over all but the finest quarter of the eps grid; an
// interval in the finest quarter violates when its ratio exceeds slack * c1.
OdeFit ode_bound_check(const std::vector<OdeSample>& samples, double g1, double g2, double g3,
                       double slack = 2.0);

// Q(eps) = <A>^{-delta} <eps A>^{delta-1} as a 1D factor.
Mat interpolating_weight(const ConjugateOperator& conj, double delta, double eps);

// Samples F_z(eps) P for a fixed random probe block P with `columns` columns.
std::vector<OdeSample> sample_F(const RegularizedFamily& F, double delta, cd z,
                                const std::vector<double>& eps, int columns,
                                std::uint64_t seed = kDefaultSeed);

struct CnFamily {
  double eps = 0.0;
  cd z;
  std::vector<SolveHandle> G;       // G^n, n = 1..N
  std::vector<double> norm_G;       // K* -> K surrogate
  std::vector<double> norm_G_weighted;  // |G^n <A>^{-1}| surrogate
  std::vector<double> derivative_residual;  // relative, per n
};

CnFamily cn_family(const Setup& setup, const CommutatorChain& chain, int N, double eps, cd z,
                   double fd_step = 1e-3, int probes = 4, std::uint64_t seed = kDefaultSeed);

// Sparse matrix H + C_n(eps) - z.
CSparseMatrix cn_operator(const DissipativeModel& model, const CommutatorChain& chain, int n,
                          double eps, cd z);

// Largest eps in (0, eps_max] (by bisection) where all G^n, n <= N, factor at every z.
double find_eps_N(const DissipativeModel& model, const CommutatorChain& chain, int N,
                  const std::vector<cd>& zs, double eps_max, int steps = 30);

struct InsertionNorms {
  double symmetric = 0.0;   // <A>^{-d} R_n <A>^{-d}
  double left = 0.0;        // <A>^{d-n} 1_-(A) R_n <A>^{-d}
  double right = 0.0;       // <A>^{-d} R_n 1_+(A) <A>^{d-n}
  double mixed = 0.0;       // <A>^{d1} 1_-(A) R_n 1_+(A) <A>^{d2}
};

// R_n = Phi_0 R Phi_1 ... R Phi_n; an empty factor stands for the identity.
InsertionNorms insertion_norms(const Setup& setup, const std::vector<Mat>& factors, cd z,
                               double delta, double delta1, double delta2, int N,
                               std::uint64_t seed = kDefaultSeed);

// |R_n| without weights.
double unweighted_insertion_norm(const Setup& setup, int n, cd z, ResolventOf which,
                                 std::uint64_t seed = kDefaultSeed);

// Relative residual of (R(z+h) - R(z-h)) / 2h against R (i Theta + 2z) R on
// probes, R(z) = (H0 - i z Theta - z^2)^{-1}.
double wave_derivative_check(const DissipativeModel& model, cd z, double h, int probes = 4,
                             std::uint64_t seed = kDefaultSeed);

}  // namespace dlap
