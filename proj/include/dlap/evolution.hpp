// Time evolution by the dissipative semigroup, the resolvent criterion for
// Kato smoothness, and the Davies statistic for absolutely continuous vectors.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlap/config.hpp"
#include "dlap/conjugate.hpp"

namespace dlap {

// Forward: u(t) = e^{-itH} u0.  Adjoint: u(t) = e^{itH*} u0.
enum class Direction { Forward, Adjoint };

// Crank-Nicolson step (I + i dt/2 G) u' = (I - i dt/2 G) u with G = H or -H*.
class CayleyPropagator {
 public:
  CayleyPropagator(const CSparseMatrix& H, double dt, Direction dir = Direction::Forward);
  Vec step(const Vec& u) const;
  double dt() const { return dt_; }

 private:
  SolveHandle lhs_;
  CSparseMatrix rhs_;
  double dt_;
};

// Q = G V* with V having orthonormal columns. Identity is G = V = I.
struct WeightOperator {
  Mat G;
  Mat V;
  std::string descriptor;

  Eigen::Index size() const { return V.rows(); }
  Eigen::Index rank() const { return V.cols(); }
  Vec apply(const Vec& u) const { return G * (V.adjoint() * u); }
  Vec apply_adjoint(const Vec& u) const { return V * (G.adjoint() * u); }
  Mat dense() const { return G * V.adjoint(); }
};

WeightOperator identity_weight(Eigen::Index n);
// <A>^{-delta} chi(H0), low rank through the support of chi.
WeightOperator cutoff_weight(const Setup& setup, double delta, const RealFunction& chi);
WeightOperator zero_weight(Eigen::Index n);

struct TrajectorySample {
  double t = 0.0;
  double norm = 0.0;
  double Q_norm_sq = 0.0;
  cd overlap{0.0, 0.0};  // <u(t), probe>
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Vec final_state;
  int steps = 0;
  double max_norm_increase = 0.0;  // max over steps of |u_{k+1}| - |u_k|
};

struct EvolveOptions {
  int sample_every = 1;
  Direction direction = Direction::Forward;
  const WeightOperator* Q = nullptr;
  const Vec* probe = nullptr;
};

Trajectory evolve(const CSparseMatrix& H, const Vec& u0, double dt, double T,
                  const EvolveOptions& opts = {});

void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

// tau uniform over `range` (count points) for each mu.
std::vector<cd> smoothing_z_grid(const Interval& range, const std::vector<double>& mus,
                                 int tau_count);

struct SmoothingConstant {
  double C = 0.0;
  double imaginary_residue = 0.0;  // max |Im| of the form over probes, relative
  cd z_at_max{0.0, 0.0};
  int z_count = 0;
};

// C = sup over z and phi of <((H-z)^{-1} - (H*-conj z)^{-1}) Q* phi, Q* phi> / (i |phi|^2).
// The sup over phi is the top eigenvalue of the compressed r x r form.
SmoothingConstant smoothing_constant(const CSparseMatrix& H, const WeightOperator& Q,
                                     const std::vector<cd>& zs, int probes = 20,
                                     std::uint64_t seed = kDefaultSeed, int threads = 1);

struct SmoothingOptions {
  double dt = 0.01;
  double T0 = 50.0;
  double T_cap = 800.0;
  double tail_fraction = 0.01;
  int sample_every = 5;
  bool strict = false;  // throw TailNotConverged instead of flagging
};

struct SmoothingReport {
  std::string Q_descriptor;
  double C_resolvent = 0.0;
  double integral_forward = 0.0;
  double integral_adjoint = 0.0;
  double psi_norm_sq = 0.0;
  double T = 0.0;
  double dt = 0.0;
  double ratio = 0.0;
  double ratio_adjoint = 0.0;
  double max_norm_increase = 0.0;
  bool tail_converged = true;
};

SmoothingReport smoothing_integral(const CSparseMatrix& H, const WeightOperator& Q, const Vec& psi,
                                   double C_resolvent, const SmoothingOptions& opts = {});

void write_smoothing_report(std::ostream& os, const SmoothingReport& r);

struct DaviesOptions {
  double dt = 0.01;
  double T0 = 50.0;
  double T_cap = 800.0;
  double growth_tol = 0.05;
  int psi_probes = 4;
  int threads = 1;
  std::uint64_t seed = kDefaultSeed;
  bool strict = false;
};

struct DaviesReport {
  double statistic = 0.0;           // at T
  double statistic_previous = 0.0;  // at T / 2
  double growth = 0.0;
  double T = 0.0;
  double norm_integral = 0.0;  // max over phi of int |u(t)|^2 dt, the Cauchy-Schwarz bound
  double max_norm_increase = 0.0;
  bool stable = false;
  std::vector<double> per_phi;
};

// Davies statistic sup_psi int_0^T |<e^{-itH} phi, psi>|^2 dt / |psi|^2, max over phi,
// doubling T until the last doubling grows less than growth_tol.
DaviesReport davies_statistic(const CSparseMatrix& H, const std::vector<Vec>& phis,
                              const DaviesOptions& opts = {});

// phi = 1_J(H0) <A>^{-delta} zeta over random unit zeta.
DaviesReport ac_subspace_check(const Setup& setup, double delta, const Interval& J,
                               int zeta_probes, const DaviesOptions& opts = {});

// |(H0+1)^{1/2} <A>^{-delta} chi(H0) <A>^{delta} (H0+1)^{1/2}|
double weighted_cutoff_boundedness(const Setup& setup, double delta, const RealFunction& chi,
                                   int N = kMaxChainOrder);

}  // namespace dlap
