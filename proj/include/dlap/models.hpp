// Discretized dissipative operators: the strip waveguide with absorbing
// Robin edges and the 1D operator with an absorbing point interaction.
//
// All matrices act on symmetrized coordinates psi = W^{1/2} phi, where W holds
// the trapezoid quadrature weights. In these coordinates the weighted inner
// product becomes the Euclidean one and every form matrix is Hermitian.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dlap/linalg.hpp"

namespace dlap {

enum class ModelKind { Waveguide2d, Delta1d };

const char* to_string(ModelKind kind);

struct GridSpec {
  double L = 40.0;
  int nx = 129;
  int ny = 9;

  double hx() const { return 2.0 * L / (nx - 1); }
  double hy() const { return ny > 1 ? 1.0 / (ny - 1) : 0.0; }
  // Throws InvalidArgument; ny = 1 is accepted for 1D models.
  void validate(bool one_dimensional) const;
};

// Boundary absorption density a(x) >= 0, together with the iterated dilation
// derivatives (-x d/dx)^n a that enter the commutator chain.
class AbsorptionProfile {
 public:
  enum class Kind { Constant, Gaussian, Tabulated };

  static AbsorptionProfile constant(double c);
  // c * exp(-x^2 / width^2)
  static AbsorptionProfile gaussian(double c, double width);
  // Piecewise-linear interpolation, constant extension past the ends.
  static AbsorptionProfile tabulated(std::vector<double> xs, std::vector<double> values);
  // Lines "x value"; '#' comments allowed.
  static AbsorptionProfile from_file(const std::string& path);

  Kind kind() const { return kind_; }
  double value(double x) const;
  double dilation_derivative(double x, int n) const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double c_ = 0.0;
  double width_ = 1.0;
  std::vector<double> xs_, values_;
};

// Optional damping layer s(x) = strength * r^3 near the artificial ends,
// r = (|x| - (L - width)) / width clipped at 0.
struct EndLayer {
  double width = 0.0;
  double strength = 0.0;

  bool enabled() const { return width > 0.0 && strength > 0.0; }
  double value(double x, double L) const;
  double dilation_derivative(double x, double L, int n) const;
};

struct DissipativeModel {
  ModelKind kind = ModelKind::Delta1d;
  GridSpec grid;
  AbsorptionProfile profile;  // waveguide edge density
  double point_strength = 0.0;  // delta1d coupling a
  EndLayer layer;

  CSparseMatrix H0;     // Hermitian, Neumann at every side
  CSparseMatrix Theta;  // physical absorption (edges or origin)
  CSparseMatrix End;    // end layer (zero when disabled)
  CSparseMatrix Hx;     // x-part of H0, i.e. Hx1 (x) I_y

  Eigen::MatrixXd hx1;  // 1D factors of the separable H0
  Eigen::MatrixXd hy1;
  RVec wx, wy;
  RVec mass_weights;  // W, node ordering i * ny + j
  RVec x_of_node;

  Eigen::Index size() const { return H0.rows(); }
  Eigen::Index origin_node() const;

  // Total dissipative part Theta + End.
  CSparseMatrix dissipative() const;
  // H = H0 - i (Theta + End)
  CSparseMatrix H() const;
  // Multiplication operator for (-x d/dx)^n applied to the absorption profile,
  // end layer included; n = 0 reproduces dissipative().
  CSparseMatrix dilation_absorption(int n) const;
  // Hermitian eigendecomposition of H0; uses the tensor structure when available.
  EigDecomp h0_eig() const;
  // f(H0) by spectral calculus on the 1D factors.
  Mat h0_function(const RealFunction& f) const;
};

DissipativeModel build_waveguide(const GridSpec& grid, const AbsorptionProfile& a,
                                 const EndLayer& layer = {});
DissipativeModel build_delta1d(const GridSpec& grid, double a, const EndLayer& layer = {});

// Eigenvalues of the ny-point Neumann Laplacian on (0, 1), ascending.
RVec transverse_thresholds(int ny);

// Green function of -u'' - i a delta(x) u on the line at Im z > 0.
cd exact_delta_green(double a, cd z, double x, double y);

// Model description: kind, L, nx, ny, absorption, end_layer ("width strength").
DissipativeModel build_model(const std::map<std::string, std::string>& description);
DissipativeModel load_model(const std::string& path);

// 1D Neumann Laplacian W^{-1/2} K W^{-1/2} on n nodes of spacing h, where K is
// the stiffness form and W the trapezoid weights.
Eigen::MatrixXd neumann_laplacian(int n, double h);
RVec trapezoid_weights(int n, double h);

}  // namespace dlap
