#include "dlap/mourre.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace dlap {

Mat spectral_basis(const EigDecomp& h0, const Interval& J) {
  const RealFunction ind = interval_indicator(J.lo, J.hi);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < h0.size(); ++i)
    if (ind(h0.values[i]) > 0.5) cols.push_back(i);
  Mat v(h0.vectors.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) v.col(static_cast<Eigen::Index>(c)) = h0.vectors.col(cols[c]);
  return v;
}

Mat spectral_projector(const EigDecomp& h0, const Interval& J) {
  const Mat v = spectral_basis(h0, J);
  return v * v.adjoint();
}

Mat spectral_projector(const DissipativeModel& model, const Interval& J) {
  return spectral_projector(model.h0_eig(), J);
}

RVec model_thresholds(const DissipativeModel& model) {
  if (model.kind == ModelKind::Delta1d) return RVec::Zero(1);
  return transverse_thresholds(model.grid.ny);
}

double predicted_alpha(const RVec& thresholds, const Interval& J, bool* threshold_in_J) {
  constexpr double tol = 1e-6;
  bool inside = false;
  for (Eigen::Index k = 0; k < thresholds.size(); ++k)
    if (thresholds[k] >= J.lo - tol && thresholds[k] <= J.hi + tol) inside = true;
  if (threshold_in_J) *threshold_in_J = inside;
  if (inside) return 0.0;
  double below = -std::numeric_limits<double>::infinity();
  double above = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < thresholds.size(); ++k) {
    if (thresholds[k] < J.lo) below = std::max(below, thresholds[k]);
    if (thresholds[k] > J.hi) above = std::min(above, thresholds[k]);
  }
  // Below the bottom of the spectrum there is no band to certify.
  if (!std::isfinite(below)) return 0.0;
  return 2.0 * std::min(J.lo - below, above - J.hi);
}

namespace {

struct Rayleigh {
  double min = 0.0, max = 0.0, residue = 0.0;
};

Rayleigh compressed_extremes(const Mat& v, const CSparseMatrix& x) {
  Rayleigh r;
  if (v.cols() == 0) return r;
  const Mat xv = x.matrix() * v;
  const Mat s = v.adjoint() * xv;
  const Mat herm = 0.5 * (s + s.adjoint());
  r.residue = 0.5 * max_abs(s - s.adjoint());
  const EigDecomp e = hermitian_eig(herm, 1e-8);
  r.min = e.values[0];
  r.max = e.values[e.size() - 1];
  return r;
}

}  // namespace

double restricted_min_rayleigh(const Setup& setup, const CSparseMatrix& X, const Interval& J,
                               const Interval& J_sub) {
  const Mat pj = spectral_projector(setup.h0, J);
  const Mat vs = spectral_basis(setup.h0, J_sub);
  if (vs.cols() == 0) return 0.0;
  const Mat s = vs.adjoint() * pj * (X.matrix() * (pj * vs));
  return hermitian_eig(0.5 * (s + s.adjoint()), 1e-8).values[0];
}

MourreCertificate mourre_certificate(const Setup& setup, const Interval& J, double beta,
                                     const MourreOptions& opts) {
  if (!(J.lo < J.hi)) throw Error(ErrorKind::InvalidArgument, "interval J is empty");
  if (beta < 0.0) throw Error(ErrorKind::InvalidArgument, "beta must be >= 0");
  MourreCertificate c;
  c.J = J;
  c.beta = beta;
  c.alpha_predicted = predicted_alpha(model_thresholds(setup.model), J, &c.threshold_in_J);

  const Mat v = spectral_basis(setup.h0, J);
  c.rank = static_cast<int>(v.cols());
  if (c.rank == 0) {
    c.empty_projector = true;
    c.pass = true;
    return c;
  }

  const int N = std::max(1, opts.order_N);
  const CommutatorChain chain = form_chain(setup.model, std::min(N + 1, kMaxChainOrder));
  const CSparseMatrix theta = setup.model.dissipative();
  const CSparseMatrix form = chain.B[0] + cd(beta) * theta;
  const Rayleigh r = compressed_extremes(v, form);
  c.alpha_observed = r.min;
  c.alpha_max = r.max;
  c.antihermitian_residue = r.residue;
  // A zero prediction is not a certificate; alpha must also be positive on the spectral scale.
  const bool positive = c.alpha_observed > 1e-8 * std::max(1.0, std::abs(c.alpha_max));
  c.pass = positive && c.alpha_observed >= opts.acceptance * c.alpha_predicted;

  if (opts.matrix_diagnostic) {
    const CommutatorChain m = ad_chain(setup.model, setup.conj, 0);
    c.alpha_matrix_commutator = compressed_extremes(v, m.B[0] + cd(beta) * theta).min;
  }

  if (opts.compute_upsilon && positive) {
    const double a = c.alpha_observed;
    c.norm_B = setup.kkstar_norm(chain.B[1]);
    c.norm_B_beta = setup.kkstar_norm(chain.B[1] + cd(beta) * theta);
    c.norm_B0 = setup.kkstar_norm(chain.B[0]);
    c.product_B_B0 = c.norm_B_beta * c.norm_B0;
    // At form level [B, iA] = B_2 and [Theta, iA] = Theta[(-x d/dx) a].
    const double comm_B = setup.kkstar_norm(chain.B[2]);
    const double comm_T = setup.kkstar_norm(setup.model.dilation_absorption(1));
    c.upsilon_terms[0] = c.norm_B / std::sqrt(a);
    c.upsilon_terms[1] = c.product_B_B0 / a;
    c.upsilon_terms[2] = (comm_B + beta * comm_T) / a;
    c.upsilon = *std::max_element(std::begin(c.upsilon_terms), std::end(c.upsilon_terms));
    double tail = 0.0;
    for (int n = 2; n <= std::min(N + 1, kMaxChainOrder); ++n)
      tail += n == 2 ? comm_B : setup.kkstar_norm(chain.B[static_cast<std::size_t>(n)]);
    c.upsilon_N = c.upsilon + tail / a;
  }
  return c;
}

void write_certificate_csv_header(std::ostream& os) {
  os << "J_lo,J_hi,beta,rank,alpha_obs,alpha_pred,upsilon,upsilon_N,pass,flags\n";
}

void write_certificate_csv_row(std::ostream& os, const MourreCertificate& c) {
  const auto old = os.precision(10);
  std::string flags;
  if (c.empty_projector) flags += "empty_projector";
  if (c.threshold_in_J) flags += std::string(flags.empty() ? "" : "|") + "threshold_in_J";
  os << c.J.lo << ',' << c.J.hi << ',' << c.beta << ',' << c.rank << ',' << c.alpha_observed
     << ',' << c.alpha_predicted << ',' << c.upsilon << ',' << c.upsilon_N << ','
     << (c.pass ? "true" : "false") << ',' << flags << '\n';
  os.precision(old);
}

void write_certificate_report(std::ostream& os, const MourreCertificate& c) {
  const auto old = os.precision(10);
  os << "J_lo = " << c.J.lo << "\nJ_hi = " << c.J.hi << "\nbeta = " << c.beta
     << "\nrank = " << c.rank << "\nalpha_observed = " << c.alpha_observed
     << "\nalpha_max = " << c.alpha_max << "\nalpha_predicted = " << c.alpha_predicted
     << "\nalpha_matrix_commutator = " << c.alpha_matrix_commutator
     << "\nantihermitian_residue = " << c.antihermitian_residue << "\nnorm_B = " << c.norm_B
     << "\nnorm_B_plus_beta_Theta = " << c.norm_B_beta << "\nnorm_B0 = " << c.norm_B0
     << "\nproduct_B_B0 = " << c.product_B_B0 << "\nupsilon_term_1 = " << c.upsilon_terms[0]
     << "\nupsilon_term_2 = " << c.upsilon_terms[1] << "\nupsilon_term_3 = " << c.upsilon_terms[2]
     << "\nupsilon = " << c.upsilon << "\nupsilon_N = " << c.upsilon_N
     << "\nempty_projector = " << (c.empty_projector ? "true" : "false")
     << "\nthreshold_in_J = " << (c.threshold_in_J ? "true" : "false")
     << "\npass = " << (c.pass ? "true" : "false") << '\n';
  os.precision(old);
}

}  // namespace dlap
