#include "dlap/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dlap/config.hpp"

namespace dlap {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Waveguide2d ? "waveguide2d" : "delta1d";
}

void GridSpec::validate(bool one_dimensional) const {
  if (!(L > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid: L must be positive");
  if (nx < 8) throw Error(ErrorKind::InvalidArgument, "grid: nx must be at least 8");
  if (one_dimensional) {
    if (ny != 1) throw Error(ErrorKind::InvalidArgument, "grid: 1D models need ny = 1");
  } else if (ny < 3) {
    throw Error(ErrorKind::InvalidArgument, "grid: ny must be at least 3");
  }
}

// ---------------------------------------------------------------------------
// Absorption profiles

AbsorptionProfile AbsorptionProfile::constant(double c) {
  if (!(c >= 0.0)) throw Error(ErrorKind::NegativeAbsorption, "constant absorption is negative");
  AbsorptionProfile p;
  p.kind_ = Kind::Constant;
  p.c_ = c;
  return p;
}

AbsorptionProfile AbsorptionProfile::gaussian(double c, double width) {
  if (!(c >= 0.0)) throw Error(ErrorKind::NegativeAbsorption, "gaussian amplitude is negative");
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidArgument, "gaussian width must be positive");
  AbsorptionProfile p;
  p.kind_ = Kind::Gaussian;
  p.c_ = c;
  p.width_ = width;
  return p;
}

AbsorptionProfile AbsorptionProfile::tabulated(std::vector<double> xs, std::vector<double> values) {
  if (xs.size() != values.size() || xs.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "tabulated profile needs at least two points");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  AbsorptionProfile p;
  p.kind_ = Kind::Tabulated;
  for (auto k : order) {
    if (!(values[k] >= 0.0)) {
      std::ostringstream msg;
      msg << "profile value " << values[k] << " at x = " << xs[k];
      throw Error(ErrorKind::NegativeAbsorption, msg.str());
    }
    if (!p.xs_.empty() && xs[k] <= p.xs_.back())
      throw Error(ErrorKind::InvalidArgument, "tabulated profile has repeated abscissae");
    p.xs_.push_back(xs[k]);
    p.values_.push_back(values[k]);
  }
  return p;
}

AbsorptionProfile AbsorptionProfile::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open profile '" + path + "'");
  std::vector<double> xs, vs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream is(line);
    double x = 0.0, v = 0.0;
    if (!(is >> x)) continue;
    if (!(is >> v))
      throw Error(ErrorKind::Io, path + ":" + std::to_string(line_no) + ": expected 'x value'");
    xs.push_back(x);
    vs.push_back(v);
  }
  return tabulated(std::move(xs), std::move(vs));
}

double AbsorptionProfile::value(double x) const {
  switch (kind_) {
    case Kind::Constant: return c_;
    case Kind::Gaussian: return c_ * std::exp(-(x * x) / (width_ * width_));
    case Kind::Tabulated: {
      if (x <= xs_.front()) return values_.front();
      if (x >= xs_.back()) return values_.back();
      const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - xs_.begin());
      const double t = (x - xs_[k - 1]) / (xs_[k] - xs_[k - 1]);
      return (1.0 - t) * values_[k - 1] + t * values_[k];
    }
  }
  return 0.0;
}

double AbsorptionProfile::dilation_derivative(double x, int n) const {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "negative derivative order");
  if (n == 0) return value(x);
  switch (kind_) {
    case Kind::Constant: return 0.0;
    case Kind::Gaussian: {
      // a = c e^{-s}, s = x^2/w^2. Since x d/dx s = 2s, (-x d/dx)^n a = c P_n(s) e^{-s}
      // with P_0 = 1 and P_{n+1}(s) = -2s (P_n'(s) - P_n(s)).
      std::vector<double> p{1.0};
      for (int k = 0; k < n; ++k) {
        std::vector<double> q(p.size() + 1, 0.0);
        for (std::size_t j = 0; j < p.size(); ++j) {
          q[j + 1] += 2.0 * p[j];
          if (j > 0) q[j] -= 2.0 * static_cast<double>(j) * p[j];
        }
        p = std::move(q);
      }
      const double s = (x * x) / (width_ * width_);
      double poly = 0.0;
      for (std::size_t j = p.size(); j-- > 0;) poly = poly * s + p[j];
      return c_ * poly * std::exp(-s);
    }
    case Kind::Tabulated: {
      // Nested central differences of the interpolant.
      const double eta = 1e-3 * std::max(1.0, std::abs(x));
      return -x * (dilation_derivative(x + eta, n - 1) - dilation_derivative(x - eta, n - 1)) /
             (2.0 * eta);
    }
  }
  return 0.0;
}

std::string AbsorptionProfile::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Constant: os << "const " << c_; break;
    case Kind::Gaussian: os << "gaussian " << c_ << ' ' << width_; break;
    case Kind::Tabulated: os << "tabulated " << xs_.size() << " points"; break;
  }
  return os.str();
}

double EndLayer::value(double x, double L) const { return dilation_derivative(x, L, 0); }

double EndLayer::dilation_derivative(double x, double L, int n) const {
  if (!enabled()) return 0.0;
  const double u = std::abs(x);
  const double u0 = L - width;
  if (u <= u0) return 0.0;
  // strength/width^3 * (u - u0)^3 expanded in powers u^k; x d/dx u^k = k u^k.
  const double binom[4] = {1.0, 3.0, 3.0, 1.0};
  double total = 0.0;
  for (int k = 0; k <= 3; ++k) {
    const double coeff = binom[k] * std::pow(-u0, 3 - k);
    total += coeff * std::pow(-static_cast<double>(k), n) * std::pow(u, k);
  }
  return strength / (width * width * width) * total;
}

// ---------------------------------------------------------------------------
// Builders

RVec trapezoid_weights(int n, double h) {
  RVec w = RVec::Constant(n, h);
  w[0] = w[n - 1] = 0.5 * h;
  return w;
}

Eigen::MatrixXd neumann_laplacian(int n, double h) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    k(i, i) += 1.0 / h;
    k(i + 1, i + 1) += 1.0 / h;
    k(i, i + 1) -= 1.0 / h;
    k(i + 1, i) -= 1.0 / h;
  }
  const RVec s = trapezoid_weights(n, h).cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * k * s.asDiagonal();
}

namespace {

CSparseMatrix kron_with_identity(const Eigen::MatrixXd& a, int m, bool left) {
  // left: a (x) I_m, otherwise I_m (x) a.
  std::vector<CSparseMatrix::Triplet> t;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      for (int k = 0; k < m; ++k) {
        if (left) t.push_back({i * m + k, j * m + k, cd(a(i, j), 0.0)});
        else t.push_back({k * n + i, k * n + j, cd(a(i, j), 0.0)});
      }
    }
  return CSparseMatrix::from_triplets(n * m, n * m, t, true);
}

void check_dissipative(const DissipativeModel& m) {
  const SpMat& th = m.Theta.matrix();
  for (Eigen::Index k = 0; k < th.nonZeros(); ++k)
    if (th.valuePtr()[k].real() < 0.0)
      throw Error(ErrorKind::NegativeAbsorption, "negative absorption on the grid");
}

}  // namespace

Eigen::Index DissipativeModel::origin_node() const {
  if (grid.nx % 2 == 0) throw Error(ErrorKind::NoOriginNode, "nx is even");
  return static_cast<Eigen::Index>(grid.nx / 2);
}

CSparseMatrix DissipativeModel::dissipative() const { return Theta + End; }

CSparseMatrix DissipativeModel::H() const { return H0 - cd(0.0, 1.0) * dissipative(); }

CSparseMatrix DissipativeModel::dilation_absorption(int n) const {
  if (n == 0) return dissipative();
  const Eigen::Index size = this->size();
  Vec d = Vec::Zero(size);
  if (kind == ModelKind::Delta1d) {
    // x delta'(x) = -delta(x), so every dilation derivative of the point term is itself.
    d[origin_node()] += point_strength / grid.hx();
  } else {
    const int ny = grid.ny;
    for (int i = 0; i < grid.nx; ++i) {
      const double v = profile.dilation_derivative(x_of_node[i * ny], n);
      d[i * ny] += v / wy[0];
      d[i * ny + ny - 1] += v / wy[ny - 1];
    }
  }
  if (layer.enabled())
    for (Eigen::Index k = 0; k < size; ++k)
      d[k] += layer.dilation_derivative(x_of_node[k], grid.L, n);
  auto out = CSparseMatrix::diagonal(d).canonicalized();
  return out;
}

EigDecomp DissipativeModel::h0_eig() const {
  const EigDecomp ex = hermitian_eig(hx1.cast<cd>());
  if (kind == ModelKind::Delta1d) return ex;
  const EigDecomp ey = hermitian_eig(hy1.cast<cd>());
  const Eigen::Index nx = ex.size(), ny = ey.size(), n = nx * ny;
  std::vector<std::pair<double, Eigen::Index>> order;
  order.reserve(n);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) order.push_back({ex.values[i] + ey.values[j], i * ny + j});
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  EigDecomp out;
  out.values.resize(n);
  out.vectors = Mat::Zero(n, n);
  const Eigen::MatrixXd vx = ex.vectors.real(), vy = ey.vectors.real();
  for (Eigen::Index c = 0; c < n; ++c) {
    out.values[c] = order[c].first;
    const Eigen::Index i = order[c].second / ny, j = order[c].second % ny;
    for (Eigen::Index p = 0; p < nx; ++p)
      for (Eigen::Index q = 0; q < ny; ++q) out.vectors(p * ny + q, c) = vx(p, i) * vy(q, j);
  }
  return out;
}

Mat DissipativeModel::h0_function(const RealFunction& f) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(hx1);
  const Eigen::MatrixXd& vx = ex.eigenvectors();
  if (kind == ModelKind::Delta1d) {
    RVec fv(vx.cols());
    for (Eigen::Index i = 0; i < fv.size(); ++i) fv[i] = f(ex.eigenvalues()[i]);
    return (vx * fv.asDiagonal() * vx.transpose()).cast<cd>();
  }
  // f(Hx (x) I + I (x) Hy) = sum_j f(Hx + mu_j) (x) v_j v_j^T
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(hy1);
  const Eigen::Index nx = hx1.rows(), ny = hy1.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nx * ny, nx * ny);
  RVec fv(nx);
  for (Eigen::Index j = 0; j < ny; ++j) {
    for (Eigen::Index i = 0; i < nx; ++i) fv[i] = f(ex.eigenvalues()[i] + ey.eigenvalues()[j]);
    const Eigen::MatrixXd fx = vx * fv.asDiagonal() * vx.transpose();
    const Eigen::MatrixXd py = ey.eigenvectors().col(j) * ey.eigenvectors().col(j).transpose();
    for (Eigen::Index p = 0; p < nx; ++p)
      for (Eigen::Index q = 0; q < nx; ++q) out.block(p * ny, q * ny, ny, ny) += fx(p, q) * py;
  }
  return out.cast<cd>();
}

DissipativeModel build_waveguide(const GridSpec& grid, const AbsorptionProfile& a,
                                 const EndLayer& layer) {
  grid.validate(false);
  DissipativeModel m;
  m.kind = ModelKind::Waveguide2d;
  m.grid = grid;
  m.profile = a;
  m.layer = layer;
  const int nx = grid.nx, ny = grid.ny;
  const double hx = grid.hx(), hy = grid.hy();
  m.hx1 = neumann_laplacian(nx, hx);
  m.hy1 = neumann_laplacian(ny, hy);
  m.wx = trapezoid_weights(nx, hx);
  m.wy = trapezoid_weights(ny, hy);
  m.Hx = kron_with_identity(m.hx1, ny, true);
  m.H0 = (m.Hx + kron_with_identity(m.hy1, nx, false)).as_hermitian();

  const Eigen::Index n = static_cast<Eigen::Index>(nx) * ny;
  m.mass_weights.resize(n);
  m.x_of_node.resize(n);
  Vec theta = Vec::Zero(n), end = Vec::Zero(n);
  for (int i = 0; i < nx; ++i) {
    const double x = -grid.L + i * hx;
    const double ai = a.value(x);
    if (!(ai >= 0.0)) {
      std::ostringstream msg;
      msg << "a(" << x << ") = " << ai;
      throw Error(ErrorKind::NegativeAbsorption, msg.str());
    }
    for (int j = 0; j < ny; ++j) {
      const Eigen::Index k = static_cast<Eigen::Index>(i) * ny + j;
      m.mass_weights[k] = m.wx[i] * m.wy[j];
      m.x_of_node[k] = x;
      end[k] = layer.value(x, grid.L);
    }
    // The boundary form sum_i wx_i a_i |phi_i0|^2 becomes a / wy_0 in symmetrized coordinates.
    theta[static_cast<Eigen::Index>(i) * ny] = ai / m.wy[0];
    theta[static_cast<Eigen::Index>(i) * ny + ny - 1] = ai / m.wy[ny - 1];
  }
  m.Theta = CSparseMatrix::diagonal(theta).canonicalized();
  m.End = CSparseMatrix::diagonal(end).canonicalized();
  check_dissipative(m);
  return m;
}

DissipativeModel build_delta1d(const GridSpec& grid_in, double a, const EndLayer& layer) {
  GridSpec grid = grid_in;
  grid.ny = 1;
  grid.validate(true);
  if (grid.nx % 2 == 0) throw Error(ErrorKind::NoOriginNode, "delta1d needs odd nx");
  if (!(a >= 0.0)) throw Error(ErrorKind::NegativeAbsorption, "point coupling is negative");
  DissipativeModel m;
  m.kind = ModelKind::Delta1d;
  m.grid = grid;
  m.point_strength = a;
  m.layer = layer;
  const int nx = grid.nx;
  const double hx = grid.hx();
  m.hx1 = neumann_laplacian(nx, hx);
  m.hy1 = Eigen::MatrixXd::Zero(1, 1);
  m.wx = trapezoid_weights(nx, hx);
  m.wy = RVec::Ones(1);
  m.H0 = CSparseMatrix::from_dense(m.hx1.cast<cd>()).as_hermitian();
  m.Hx = m.H0;
  m.mass_weights = m.wx;
  m.x_of_node.resize(nx);
  Vec theta = Vec::Zero(nx), end = Vec::Zero(nx);
  for (int i = 0; i < nx; ++i) {
    m.x_of_node[i] = -grid.L + i * hx;
    end[i] = layer.value(m.x_of_node[i], grid.L);
  }
  m.x_of_node[nx / 2] = 0.0;
  theta[nx / 2] = a / hx;
  m.Theta = CSparseMatrix::diagonal(theta).canonicalized();
  m.End = CSparseMatrix::diagonal(end).canonicalized();
  return m;
}

RVec transverse_thresholds(int ny) {
  if (ny < 3) throw Error(ErrorKind::InvalidArgument, "transverse grid needs ny >= 3");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neumann_laplacian(ny, 1.0 / (ny - 1)),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

cd exact_delta_green(double a, cd z, double x, double y) {
  if (!(z.imag() > 0.0)) throw Error(ErrorKind::NonPhysicalZ, "Green function needs Im z > 0");
  const cd k = std::sqrt(z);  // principal branch: Im k > 0 here
  auto g0 = [&k](double p, double q) { return cd(0.0, 1.0) * std::exp(cd(0.0, 1.0) * k * std::abs(p - q)) / (2.0 * k); };
  const cd ia(0.0, a);
  return g0(x, y) + ia * g0(x, 0.0) * g0(0.0, y) / (1.0 - ia * g0(0.0, 0.0));
}

DissipativeModel build_model(const std::map<std::string, std::string>& d) {
  static const char* const known[] = {"kind", "L", "nx", "ny", "absorption", "end_layer"};
  for (const auto& [key, value] : d) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw Error(ErrorKind::Config, "unknown model key '" + key + "'");
  }
  auto get = [&d](const std::string& key) -> std::string {
    auto it = d.find(key);
    if (it == d.end()) throw Error(ErrorKind::Config, "missing model key '" + key + "'");
    return it->second;
  };
  auto number = [&](const std::string& key, const std::string& text) {
    std::istringstream is(text);
    double v = 0.0;
    if (!(is >> v) || !(is >> std::ws).eof())
      throw Error(ErrorKind::Config, "model key '" + key + "': bad number '" + text + "'");
    return v;
  };

  const std::string kind = get("kind");
  GridSpec grid;
  grid.L = number("L", get("L"));
  grid.nx = static_cast<int>(number("nx", get("nx")));

  AbsorptionProfile profile = AbsorptionProfile::constant(0.0);
  if (d.count("absorption")) {
    std::istringstream is(d.at("absorption"));
    std::string form;
    is >> form;
    std::vector<std::string> args;
    for (std::string s; is >> s;) args.push_back(s);
    if (form == "const" && args.size() == 1) {
      profile = AbsorptionProfile::constant(number("absorption", args[0]));
    } else if (form == "gaussian" && args.size() == 2) {
      profile = AbsorptionProfile::gaussian(number("absorption", args[0]),
                                            number("absorption", args[1]));
    } else if (form == "file" && args.size() == 1) {
      profile = AbsorptionProfile::from_file(args[0]);
    } else {
      throw Error(ErrorKind::Config, "model key 'absorption': expected 'const c', "
                                     "'gaussian c width' or 'file path'");
    }
  }

  EndLayer layer;
  if (d.count("end_layer") && d.at("end_layer") != "none") {
    std::istringstream is(d.at("end_layer"));
    if (!(is >> layer.width >> layer.strength) || layer.width <= 0.0 || layer.strength < 0.0 ||
        layer.width >= grid.L)
      throw Error(ErrorKind::Config, "model key 'end_layer': expected 'width strength'");
  }

  if (kind == "waveguide" || kind == "waveguide2d") {
    grid.ny = static_cast<int>(number("ny", get("ny")));
    return build_waveguide(grid, profile, layer);
  }
  if (kind == "delta1d") {
    if (d.count("ny") && number("ny", d.at("ny")) != 1.0)
      throw Error(ErrorKind::Config, "model key 'ny': delta1d requires ny = 1");
    if (profile.kind() != AbsorptionProfile::Kind::Constant)
      throw Error(ErrorKind::Config, "model key 'absorption': delta1d takes 'const a'");
    grid.ny = 1;
    return build_delta1d(grid, profile.value(0.0), layer);
  }
  throw Error(ErrorKind::Config, "model key 'kind': unknown kind '" + kind + "'");
}

DissipativeModel load_model(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  std::map<std::string, std::string> d;
  for (const auto& [key, entry] : kv.entries()) {
    const std::string k = key.rfind("model.", 0) == 0 ? key.substr(6) : key;
    d[k] = entry.value;
  }
  return build_model(d);
}

}  // namespace dlap
