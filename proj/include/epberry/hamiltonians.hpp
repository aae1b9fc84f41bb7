#pragma once

// Parametrized Hamiltonian families H(X) = A0 + sum_j X_j A_j and closed
// parameter loops X(t) = center + epsilon * shape(t).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "epberry/numerics.hpp"

namespace epberry {

enum class Symmetry { Symmetric, General };

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64);
/// each draw advances first and returns the top 53 bits scaled to [0, 1).
class Lcg {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg(std::uint64_t seed) : state_(seed) {}

  double uniform() {
    state_ = state_ * kMultiplier + kIncrement;
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }

  /// Uniform on [-1, 1).
  double symmetric() { return 2.0 * uniform() - 1.0; }

  /// Real part drawn before imaginary part.
  cplx complex() {
    const double re = symmetric();
    const double im = symmetric();
    return {re, im};
  }

  /// Row-major fill.
  ComplexMatrix matrix(Eigen::Index n) {
    ComplexMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = complex();
    return m;
  }

  /// Upper triangle drawn row-major, mirrored below the diagonal.
  ComplexMatrix symmetric_matrix(Eigen::Index n) {
    ComplexMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) m(i, j) = m(j, i) = complex();
    return m;
  }

 private:
  std::uint64_t state_;
};

class HamiltonianFamily {
 public:
  /// matrices = {A0, A1, ..., Am}; all n x n with n <= 64 and m >= 2.
  HamiltonianFamily(std::string name, std::vector<ComplexMatrix> matrices,
                    std::optional<Symmetry> declared = std::nullopt)
      : name_(std::move(name)), matrices_(std::move(matrices)) {
    if (matrices_.size() < 3)
      fail(ErrorKind::InvalidArgument, "family '" + name_ + "': need at least two parameters");
    const Eigen::Index n = matrices_.front().rows();
    if (n < 2 || static_cast<std::size_t>(n) > kMaxDimension)
      fail(ErrorKind::InvalidArgument, "family '" + name_ + "': dimension must be in [2, 64]");
    bool sym = true;
    for (std::size_t j = 0; j < matrices_.size(); ++j) {
      const auto& a = matrices_[j];
      if (a.rows() != n || a.cols() != n)
        fail(ErrorKind::InvalidArgument, "family '" + name_ + "': matrix " + std::to_string(j) +
                                             " is not " + std::to_string(n) + "x" +
                                             std::to_string(n));
      if (!all_finite(a))
        fail(ErrorKind::InvalidArgument, "family '" + name_ + "': non-finite entry in matrix " +
                                             std::to_string(j));
      if ((a - a.transpose()).norm() > 1e-12 * a.norm()) sym = false;
    }
    symmetry_ = sym ? Symmetry::Symmetric : Symmetry::General;
    if (declared == Symmetry::Symmetric && !sym)
      fail(ErrorKind::InvalidArgument,
           "family '" + name_ + "': declared symmetric but matrices are not");
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrices_.front().rows()); }
  std::size_t param_count() const { return matrices_.size() - 1; }
  Symmetry symmetry() const { return symmetry_; }
  bool is_symmetric() const { return symmetry_ == Symmetry::Symmetric; }
  const std::vector<ComplexMatrix>& matrices() const { return matrices_; }

  ComplexMatrix evaluate(const RealVector& x) const {
    check_point(x);
    ComplexMatrix h = matrices_[0];
    for (std::size_t j = 0; j < param_count(); ++j)
      h += x(static_cast<Eigen::Index>(j)) * matrices_[j + 1];
    return h;
  }

  /// dH/dX_j, constant for affine families.
  ComplexMatrix derivative(const RealVector& x, std::size_t j) const {
    check_point(x);
    if (j >= param_count())
      fail(ErrorKind::InvalidArgument, "derivative: parameter index out of range");
    return matrices_[j + 1];
  }

  /// sum_j dH/dX_j * v_j
  ComplexMatrix directional_derivative(const RealVector& x, const RealVector& v) const {
    check_point(v);
    ComplexMatrix d = ComplexMatrix::Zero(matrices_[0].rows(), matrices_[0].cols());
    for (std::size_t j = 0; j < param_count(); ++j)
      d += v(static_cast<Eigen::Index>(j)) * derivative(x, j);
    return d;
  }

 private:
  void check_point(const RealVector& x) const {
    if (static_cast<std::size_t>(x.size()) != param_count())
      fail(ErrorKind::InvalidArgument, "family '" + name_ + "': expected " +
                                           std::to_string(param_count()) + " parameters, got " +
                                           std::to_string(x.size()));
  }

  std::string name_;
  std::vector<ComplexMatrix> matrices_;
  Symmetry symmetry_ = Symmetry::General;
};

struct BuiltinOptions {
  std::optional<cplx> delta;   // first spectator level (sym3, gen3, gen4)
  std::optional<cplx> delta2;  // second spectator level (gen4)
  double coupling = 1.0;       // scale of the seeded A1, A2
  std::uint64_t seed = 7;
};

inline constexpr cplx kDefaultDelta{2.0, 0.0};
inline constexpr cplx kDefaultDelta2{-1.5, 1.0};

namespace detail {

inline RealVector vec2(double a, double b) {
  RealVector v(2);
  v << a, b;
  return v;
}

/// Fails when Re and Im of the EP gradient are linearly dependent, i.e. the
/// loop plane does not isolate the exceptional point.
inline void require_isolated_ep(const std::string& name, const ComplexVector& mu_grad) {
  const double re0 = mu_grad(0).real(), re1 = mu_grad(1).real();
  const double im0 = mu_grad(0).imag(), im1 = mu_grad(1).imag();
  const double det = re0 * im1 - re1 * im0;
  if (std::abs(det) < 0.05 * mu_grad.squaredNorm())
    fail(ErrorKind::InvalidArgument,
         "builtin '" + name + "': Re/Im of the EP gradient are dependent, choose another seed");
}

inline HamiltonianFamily similar_jordan_family(const std::string& name,
                                               const std::vector<cplx>& spectators,
                                               const BuiltinOptions& opt) {
  const auto n = static_cast<Eigen::Index>(2 + spectators.size());
  Lcg rng(opt.seed);
  ComplexMatrix s = ComplexMatrix::Identity(n, n) + 0.4 * rng.matrix(n);
  // Perturbations in the Jordan basis: seeded and dense, except that the
  // entry steering the pair apart is pinned to 1 (x) and i (y). The EP
  // gradient (S^-1 A_j S)_{21} is then exactly (1, i) and the EP is isolated.
  ComplexMatrix b1 = opt.coupling * rng.matrix(n);
  ComplexMatrix b2 = opt.coupling * rng.matrix(n);
  b1(1, 0) = 1.0;
  b2(1, 0) = cplx(0.0, 1.0);

  ComplexMatrix core = ComplexMatrix::Zero(n, n);
  core(0, 1) = 1.0;
  for (std::size_t k = 0; k < spectators.size(); ++k)
    core(static_cast<Eigen::Index>(2 + k), static_cast<Eigen::Index>(2 + k)) = spectators[k];

  Eigen::PartialPivLU<ComplexMatrix> lu(s);
  if (!(std::abs(lu.determinant()) > 1e-3))
    fail(ErrorKind::InvalidArgument, "builtin '" + name + "': similarity matrix singular, choose another seed");
  const ComplexMatrix s_inv = lu.inverse();
  return HamiltonianFamily(name, {s * core * s_inv, s * b1 * s_inv, s * b2 * s_inv},
                           Symmetry::General);
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"sym2", "gen2", "sym3", "gen3", "gen4"};
  return names;
}

/// Built-in families with exactly known exceptional points.
///
///   sym2: [[x+iy, 1], [1, -(x+iy)]], EPs at (0, +-1) with E = 0
///   gen2: [[0, 1], [x+iy, 0]], EP at (0, 0) with E = 0
///   sym3: B (+) [delta] + x A1 + y A2, B = [[1, i], [i, -1]], A1, A2 symmetric
///   gen3, gen4: S (J2(0) (+) D) S^-1 + x A1 + y A2
inline HamiltonianFamily builtin(const std::string& name, const BuiltinOptions& opt = {}) {
  const cplx I{0.0, 1.0};
  if (name == "sym2") {
    ComplexMatrix a0(2, 2), a1(2, 2), a2(2, 2);
    a0 << 0.0, 1.0, 1.0, 0.0;
    a1 << 1.0, 0.0, 0.0, -1.0;
    a2 << I, 0.0, 0.0, -I;
    return HamiltonianFamily("sym2", {a0, a1, a2}, Symmetry::Symmetric);
  }
  if (name == "gen2") {
    ComplexMatrix a0(2, 2), a1(2, 2), a2(2, 2);
    a0 << 0.0, 1.0, 0.0, 0.0;
    a1 << 0.0, 0.0, 1.0, 0.0;
    a2 << 0.0, 0.0, I, 0.0;
    return HamiltonianFamily("gen2", {a0, a1, a2});
  }
  if (name == "sym3") {
    const cplx delta = opt.delta.value_or(kDefaultDelta);
    if (delta == cplx(0.0))
      fail(ErrorKind::InvalidArgument, "builtin 'sym3': delta = 0 is a triple degeneracy");
    Lcg rng(opt.seed);
    ComplexMatrix a0 = ComplexMatrix::Zero(3, 3);
    a0(0, 0) = 1.0;
    a0(0, 1) = I;
    a0(1, 0) = I;
    a0(1, 1) = -1.0;
    a0(2, 2) = delta;
    ComplexMatrix a1 = opt.coupling * rng.symmetric_matrix(3);
    ComplexMatrix a2 = opt.coupling * rng.symmetric_matrix(3);
    // chi0 = (1, i, 0)/sqrt(2)-ish; for symmetric H the left chain equals the
    // right one, so the gradient is chi0^T A_j chi0 up to a common scale.
    ComplexVector chi0(3);
    chi0 << 1.0, I, 0.0;
    ComplexVector g(2);
    g(0) = pair(chi0, a1, chi0);
    g(1) = pair(chi0, a2, chi0);
    detail::require_isolated_ep("sym3", g);
    return HamiltonianFamily("sym3", {a0, a1, a2}, Symmetry::Symmetric);
  }
  if (name == "gen3") {
    const cplx delta = opt.delta.value_or(kDefaultDelta);
    if (delta == cplx(0.0))
      fail(ErrorKind::InvalidArgument, "builtin 'gen3': delta = 0 is a triple degeneracy");
    return detail::similar_jordan_family("gen3", {delta}, opt);
  }
  if (name == "gen4") {
    const cplx delta = opt.delta.value_or(kDefaultDelta);
    const cplx delta2 = opt.delta2.value_or(kDefaultDelta2);
    if (delta == cplx(0.0) || delta2 == cplx(0.0))
      fail(ErrorKind::InvalidArgument, "builtin 'gen4': spectator at 0 is a triple degeneracy");
    if (delta == delta2)
      fail(ErrorKind::InvalidArgument, "builtin 'gen4': spectator levels coincide");
    return detail::similar_jordan_family("gen4", {delta, delta2}, opt);
  }
  fail(ErrorKind::InvalidArgument, "unknown builtin family '" + name + "'");
}

/// Documented exceptional point of a built-in family (the first one for sym2).
inline RealVector builtin_ep(const std::string& name) {
  if (name == "sym2") return detail::vec2(0.0, 1.0);
  return detail::vec2(0.0, 0.0);
}

namespace detail {

inline ComplexMatrix parse_matrix(const nlohmann::json& j, std::size_t n, std::size_t index) {
  const std::string where = "matrices[" + std::to_string(index) + "]";
  if (!j.is_array() || j.size() != n)
    fail(ErrorKind::InvalidArgument, where + ": expected " + std::to_string(n) + " rows");
  ComplexMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != n)
      fail(ErrorKind::InvalidArgument,
           where + "[" + std::to_string(r) + "]: expected " + std::to_string(n) + " entries");
    for (std::size_t c = 0; c < n; ++c) {
      const auto& e = row[c];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(ErrorKind::InvalidArgument, where + "[" + std::to_string(r) + "][" +
                                             std::to_string(c) + "]: expected [re, im]");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cplx(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

}  // namespace detail

/// Builds a family from the JSON affine-family document
/// { "name", "dim", "params", "symmetric", "matrices": [A0, ..., Am] }.
inline HamiltonianFamily family_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::InvalidArgument, "family: expected a JSON object");
  for (const char* key : {"name", "dim", "params", "matrices"})
    if (!doc.contains(key)) fail(ErrorKind::InvalidArgument, std::string("family: missing '") + key + "'");
  if (!doc["name"].is_string()) fail(ErrorKind::InvalidArgument, "family: 'name' must be a string");
  if (!doc["dim"].is_number_integer() || doc["dim"].get<long long>() < 2 ||
      doc["dim"].get<long long>() > static_cast<long long>(kMaxDimension))
    fail(ErrorKind::InvalidArgument, "family: 'dim' must be an integer in [2, 64]");
  if (!doc["params"].is_number_integer() || doc["params"].get<long long>() < 2)
    fail(ErrorKind::InvalidArgument, "family: 'params' must be an integer >= 2");
  const auto n = doc["dim"].get<std::size_t>();
  const auto m = doc["params"].get<std::size_t>();
  const auto& mats = doc["matrices"];
  if (!mats.is_array() || mats.size() != m + 1)
    fail(ErrorKind::InvalidArgument,
         "family: 'matrices' must hold params + 1 = " + std::to_string(m + 1) + " matrices");
  std::vector<ComplexMatrix> a;
  for (std::size_t j = 0; j <= m; ++j) a.push_back(detail::parse_matrix(mats[j], n, j));
  std::optional<Symmetry> declared;
  if (doc.contains("symmetric")) {
    if (!doc["symmetric"].is_boolean())
      fail(ErrorKind::InvalidArgument, "family: 'symmetric' must be a boolean");
    if (doc["symmetric"].get<bool>()) declared = Symmetry::Symmetric;
  }
  return HamiltonianFamily(doc["name"].get<std::string>(), std::move(a), declared);
}

inline HamiltonianFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open family file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, "family file '" + path + "': " + e.what());
  }
  return family_from_json(doc);
}

inline nlohmann::json family_to_json(const HamiltonianFamily& f) {
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& a : f.matrices()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back({a(i, j).real(), a(i, j).imag()});
      rows.push_back(row);
    }
    mats.push_back(rows);
  }
  return {{"name", f.name()},
          {"dim", f.dim()},
          {"params", f.param_count()},
          {"symmetric", f.is_symmetric()},
          {"matrices", mats}};
}

// ---------------------------------------------------------------------------
// Loops

/// Unit-scale closed path shape(t), t in [0, 1], with its t-derivative.
struct LoopShape {
  std::string name;
  std::size_t dim = 2;
  std::function<RealVector(double)> point;
  std::function<RealVector(double)> velocity;
};

namespace detail {

inline double unit_phase(double t) {
  double f = t - std::floor(t);
  return f;
}

inline void check_plane(std::size_t m, std::size_t j1, std::size_t j2) {
  if (j1 == j2 || j1 >= m || j2 >= m)
    fail(ErrorKind::InvalidArgument, "loop plane (" + std::to_string(j1) + ", " +
                                         std::to_string(j2) + ") invalid for " +
                                         std::to_string(m) + " parameters");
}

/// Polar curve r(theta) in the (j1, j2) plane, theta = 2 pi t.
inline LoopShape polar_shape(std::string name, std::size_t m, std::size_t j1, std::size_t j2,
                             std::function<double(double)> rx, std::function<double(double)> drx,
                             std::function<double(double)> ry, std::function<double(double)> dry) {
  check_plane(m, j1, j2);
  LoopShape s;
  s.name = std::move(name);
  s.dim = m;
  const auto e1 = static_cast<Eigen::Index>(j1), e2 = static_cast<Eigen::Index>(j2);
  s.point = [=](double t) {
    const double th = 2.0 * kPi * unit_phase(t);
    RealVector x = RealVector::Zero(static_cast<Eigen::Index>(m));
    x(e1) = rx(th) * std::cos(th);
    x(e2) = ry(th) * std::sin(th);
    return x;
  };
  s.velocity = [=](double t) {
    const double th = 2.0 * kPi * unit_phase(t);
    RealVector v = RealVector::Zero(static_cast<Eigen::Index>(m));
    v(e1) = 2.0 * kPi * (drx(th) * std::cos(th) - rx(th) * std::sin(th));
    v(e2) = 2.0 * kPi * (dry(th) * std::sin(th) + ry(th) * std::cos(th));
    return v;
  };
  return s;
}

}  // namespace detail

inline LoopShape circle_shape(std::size_t m = 2, std::size_t j1 = 0, std::size_t j2 = 1) {
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  return detail::polar_shape("circle", m, j1, j2, one, zero, one, zero);
}

/// Semi-axes 1 along j1 and 1/ratio along j2.
inline LoopShape ellipse_shape(double ratio, std::size_t m = 2, std::size_t j1 = 0,
                               std::size_t j2 = 1) {
  if (!(ratio > 0.0)) fail(ErrorKind::InvalidArgument, "ellipse: axis ratio must be positive");
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  auto minor = [ratio](double) { return 1.0 / ratio; };
  return detail::polar_shape("ellipse", m, j1, j2, one, zero, minor, zero);
}

/// r(theta) = 1 + depth * cos(lobes * theta); star-shaped for depth < 1.
inline LoopShape star_shape(int lobes = 5, double depth = 0.3, std::size_t m = 2,
                            std::size_t j1 = 0, std::size_t j2 = 1) {
  if (lobes < 1 || !(depth >= 0.0) || depth >= 1.0)
    fail(ErrorKind::InvalidArgument, "star: need lobes >= 1 and depth in [0, 1)");
  const double k = lobes;
  auto r = [=](double th) { return 1.0 + depth * std::cos(k * th); };
  auto dr = [=](double th) { return -depth * k * std::sin(k * th); };
  return detail::polar_shape("star", m, j1, j2, r, dr, r, dr);
}

/// Trigonometric interpolant through points p_0..p_{K-1} placed at t = k/K.
inline LoopShape points_shape(const std::vector<RealVector>& points) {
  const std::size_t k = points.size();
  if (k < 3) fail(ErrorKind::InvalidArgument, "points loop: need at least 3 points");
  const auto m = points.front().size();
  for (const auto& p : points)
    if (p.size() != m) fail(ErrorKind::InvalidArgument, "points loop: inconsistent dimensions");
  // Fourier coefficients c_q for q in [-(K-1)/2, K/2]; the Nyquist term of an
  // even K is split evenly between +-K/2 so the interpolant stays real.
  const long kk = static_cast<long>(k);
  const long qmin = -(kk - 1) / 2, qmax = kk / 2;
  std::vector<std::pair<long, Eigen::VectorXcd>> coeffs;
  for (long q = qmin; q <= qmax; ++q) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(m);
    for (std::size_t p = 0; p < k; ++p) {
      const double ang = -2.0 * kPi * static_cast<double>(q) * static_cast<double>(p) / k;
      c += points[p].cast<cplx>() * cplx(std::cos(ang), std::sin(ang));
    }
    c /= static_cast<double>(k);
    if (kk % 2 == 0 && q == qmax) {
      coeffs.emplace_back(q, 0.5 * c);
      coeffs.emplace_back(-q, 0.5 * c);
    } else {
      coeffs.emplace_back(q, c);
    }
  }
  LoopShape s;
  s.name = "points";
  s.dim = static_cast<std::size_t>(m);
  s.point = [coeffs, m](double t) {
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(m);
    for (const auto& [q, c] : coeffs) {
      const double ang = 2.0 * kPi * static_cast<double>(q) * detail::unit_phase(t);
      x += c * cplx(std::cos(ang), std::sin(ang));
    }
    return RealVector(x.real());
  };
  s.velocity = [coeffs, m](double t) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(m);
    for (const auto& [q, c] : coeffs) {
      const double w = 2.0 * kPi * static_cast<double>(q);
      const double ang = w * detail::unit_phase(t);
      v += c * (cplx(0.0, w) * cplx(std::cos(ang), std::sin(ang)));
    }
    return RealVector(v.real());
  };
  return s;
}

/// Same path traversed in the opposite direction.
inline LoopShape reversed(const LoopShape& s) {
  LoopShape r = s;
  r.name = s.name + "-reversed";
  r.point = [p = s.point](double t) { return p(1.0 - detail::unit_phase(t)); };
  r.velocity = [v = s.velocity](double t) { return RealVector(-v(1.0 - detail::unit_phase(t))); };
  return r;
}

/// Realized loop X(t) = center + epsilon * shape(t), sampled at t = k / samples.
struct ParameterLoop {
  RealVector center;
  LoopShape shape;
  double epsilon = 1.0;
  std::size_t samples = 256;

  ParameterLoop(RealVector c, LoopShape s, double eps, std::size_t n)
      : center(std::move(c)), shape(std::move(s)), epsilon(eps), samples(n) {
    if (!(epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "loop: epsilon must be positive");
    if (samples < 16) fail(ErrorKind::InvalidArgument, "loop: need at least 16 samples");
    if (static_cast<std::size_t>(center.size()) != shape.dim)
      fail(ErrorKind::InvalidArgument, "loop: center and shape dimensions differ");
  }

  /// Periodic in t with period 1; X(0) == X(1) bit for bit.
  RealVector point(double t) const { return center + epsilon * shape.point(detail::unit_phase(t)); }
  RealVector velocity(double t) const {
    return epsilon * shape.velocity(detail::unit_phase(t));
  }

  ParameterLoop with_samples(std::size_t n) const {
    return ParameterLoop(center, shape, epsilon, n);
  }
};

inline ParameterLoop circle_loop(const RealVector& center, std::pair<std::size_t, std::size_t> plane,
                                 double epsilon, std::size_t samples) {
  return ParameterLoop(center,
                       circle_shape(static_cast<std::size_t>(center.size()), plane.first, plane.second),
                       epsilon, samples);
}

}  // namespace epberry
