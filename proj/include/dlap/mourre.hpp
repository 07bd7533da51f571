// Spectral projectors of H0 and numerical certificates for the positive
// commutator estimate 1_J(H0) (B0 + beta Theta) 1_J(H0) >= alpha 1_J(H0).

#pragma once

#include <iosfwd>
#include <string>

#include "dlap/config.hpp"
#include "dlap/conjugate.hpp"

namespace dlap {

// Orthonormal basis of Ran 1_J(H0), J = [lo, hi) with the linalg tie convention.
Mat spectral_basis(const EigDecomp& h0, const Interval& J);
Mat spectral_projector(const EigDecomp& h0, const Interval& J);
Mat spectral_projector(const DissipativeModel& model, const Interval& J);

// 2 * dist(J, thresholds) when J lies between consecutive thresholds, else 0.
double predicted_alpha(const RVec& thresholds, const Interval& J, bool* threshold_in_J = nullptr);

// Discrete thresholds of the model (transverse spectrum, or {0} in 1D).
RVec model_thresholds(const DissipativeModel& model);

struct MourreCertificate {
  Interval J;
  double beta = 0.0;
  int rank = 0;
  double alpha_observed = 0.0;
  double alpha_max = 0.0;  // largest Rayleigh quotient on Ran 1_J(H0)
  double alpha_predicted = 0.0;
  double upsilon = 0.0;
  double upsilon_N = 0.0;
  // Def-level factors: |B|/sqrt(alpha), |B+beta Theta| |B0| / alpha, (|[B,A]| + beta |[Theta,A]|)/alpha
  double upsilon_terms[3] = {0.0, 0.0, 0.0};
  double norm_B = 0.0, norm_B_beta = 0.0, norm_B0 = 0.0, product_B_B0 = 0.0;
  double antihermitian_residue = 0.0;
  // Same quantity with the algebraic commutator of the discrete matrices.
  double alpha_matrix_commutator = 0.0;
  bool empty_projector = false;
  bool threshold_in_J = false;
  bool pass = false;
};

struct MourreOptions {
  double acceptance = 0.9;
  int order_N = 3;
  bool compute_upsilon = true;
  bool matrix_diagnostic = true;
};

MourreCertificate mourre_certificate(const Setup& setup, const Interval& J, double beta,
                                     const MourreOptions& opts = {});

// Minimum of the Hermitian part of  V_sub* (Pi_J X Pi_J) V_sub, where V_sub spans
// Ran 1_{J'}(H0) for J' inside J; used for the nesting property.
double restricted_min_rayleigh(const Setup& setup, const CSparseMatrix& X, const Interval& J,
                               const Interval& J_sub);

void write_certificate_csv_header(std::ostream& os);
void write_certificate_csv_row(std::ostream& os, const MourreCertificate& c);
void write_certificate_report(std::ostream& os, const MourreCertificate& c);

}  // namespace dlap
