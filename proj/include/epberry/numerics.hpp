#pragma once

// Dense complex linear algebra used throughout the library.
//
// Left eigenvectors and covectors are stored as plain column vectors u with
// u^T A = lambda u^T, and the pairing <u|v> is the bilinear sum sum_i u_i v_i
// with no complex conjugation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epberry/error.hpp"

namespace epberry {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr std::size_t kMaxDimension = 64;
inline constexpr double kPi = 3.14159265358979323846;

/// Bilinear pairing <u|v> = sum_i u_i v_i.
inline cplx pair(const ComplexVector& u, const ComplexVector& v) {
  return (u.transpose() * v)(0, 0);
}

/// <u|M|v> with the same bilinear convention.
inline cplx pair(const ComplexVector& u, const ComplexMatrix& m, const ComplexVector& v) {
  return (u.transpose() * (m * v))(0, 0);
}

/// |u><w| as a matrix (no conjugation on w).
inline ComplexMatrix outer(const ComplexVector& u, const ComplexVector& w) {
  return u * w.transpose();
}

inline double fro_norm(const ComplexMatrix& a) { return a.norm(); }

inline bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
  return true;
}

/// Orders complex numbers by real part, then imaginary part.
inline bool complex_less(const cplx& a, const cplx& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

/// Maps a real angle to the principal interval (-pi, pi].
inline double wrap_angle(double x) {
  double r = std::remainder(x, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

/// Real part in (-pi, pi]; values within 1e-12 of -pi are reported as +pi so
/// that the topological value has a single representative.
inline cplx principal_phase(cplx g) {
  double r = wrap_angle(g.real());
  if (r < -kPi + 1e-12) r += 2.0 * kPi;
  return {r, g.imag()};
}

/// |a - b| with the real parts compared modulo 2 pi.
inline double phase_distance(cplx a, cplx b) {
  return std::abs(cplx(wrap_angle(a.real() - b.real()), a.imag() - b.imag()));
}

struct EigenTriple {
  cplx value;
  ComplexVector right;
  ComplexVector left;
};

namespace detail {

inline void require_square(const ComplexMatrix& a, const char* who) {
  if (a.rows() != a.cols())
    fail(ErrorKind::InvalidArgument,
         std::string(who) + ": matrix is " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + ", expected square");
  if (static_cast<std::size_t>(a.rows()) > kMaxDimension)
    fail(ErrorKind::InvalidArgument, std::string(who) + ": dimension exceeds 64");
}

inline void sorted_eigen(const ComplexMatrix& a, std::vector<cplx>& values,
                         std::vector<ComplexVector>& vectors) {
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, true);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::NonConvergence, "eig_general: QR iteration did not converge");
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return complex_less(ev(static_cast<Eigen::Index>(x)), ev(static_cast<Eigen::Index>(y)));
  });
  values.clear();
  vectors.clear();
  for (std::size_t i : order) {
    values.push_back(ev(static_cast<Eigen::Index>(i)));
    vectors.push_back(solver.eigenvectors().col(static_cast<Eigen::Index>(i)));
  }
}

}  // namespace detail

/// General eigendecomposition with right and left eigenvectors.
///
/// Eigenvalues are sorted by real part, then imaginary part. Left vectors come
/// from the eigendecomposition of A^T and are matched to right vectors by
/// nearest eigenvalue. No biorthonormalization is applied; vectors have unit
/// Euclidean norm.
inline std::vector<EigenTriple> eig_general(const ComplexMatrix& a) {
  detail::require_square(a, "eig_general");
  std::vector<cplx> rv, lv;
  std::vector<ComplexVector> rvec, lvec;
  detail::sorted_eigen(a, rv, rvec);
  detail::sorted_eigen(a.transpose(), lv, lvec);

  const std::size_t n = rv.size();
  std::vector<bool> used(n, false);
  std::vector<EigenTriple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = std::abs(lv[j] - rv[i]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    used[best] = true;
    out.push_back({rv[i], rvec[i], lvec[best]});
  }
  return out;
}

/// Eigenvalues only, sorted as in eig_general.
inline std::vector<cplx> eigenvalues(const ComplexMatrix& a) {
  detail::require_square(a, "eigenvalues");
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, false);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::NonConvergence, "eigenvalues: QR iteration did not converge");
  std::vector<cplx> v(solver.eigenvalues().data(),
                      solver.eigenvalues().data() + solver.eigenvalues().size());
  std::stable_sort(v.begin(), v.end(), complex_less);
  return v;
}

struct SmallestSingular {
  double sigma_min = 0.0;
  double sigma_second = std::numeric_limits<double>::infinity();
  ComplexVector right;  // unit v with A v = sigma_min * left
  ComplexVector left;   // unit u with u^H A = sigma_min * v^H
};

inline SmallestSingular svd_smallest(const ComplexMatrix& a) {
  detail::require_square(a, "svd_smallest");
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Index n = a.rows();
  SmallestSingular s;
  s.sigma_min = svd.singularValues()(n - 1);
  if (n > 1) s.sigma_second = svd.singularValues()(n - 2);
  s.right = svd.matrixV().col(n - 1);
  s.left = svd.matrixU().col(n - 1);
  return s;
}

/// Minimum-norm least-squares solution of A x = b.
///
/// Singular values below rank_tol * sigma_max are treated as zero. Throws
/// InconsistentSystem when ||A x - b|| > tol * ||b||.
inline ComplexVector solve_min_norm(const ComplexMatrix& a, const ComplexVector& b, double tol,
                                    double rank_tol = 1e-10) {
  detail::require_square(a, "solve_min_norm");
  if (b.size() != a.rows())
    fail(ErrorKind::InvalidArgument, "solve_min_norm: right-hand side has wrong length");
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = rank_tol * (sv.size() > 0 ? sv(0) : 0.0);
  ComplexVector coeff = svd.matrixU().adjoint() * b;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    coeff(i) = (sv(i) > cutoff && sv(i) > 0.0) ? coeff(i) / sv(i) : cplx(0.0);
  ComplexVector x = svd.matrixV() * coeff;
  const double residual = (a * x - b).norm();
  if (residual > tol * b.norm())
    fail(ErrorKind::InconsistentSystem,
         "solve_min_norm: residual " + std::to_string(residual) + " exceeds tolerance");
  return x;
}

/// Least-squares fit y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorKind::InvalidArgument, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) fail(ErrorKind::InvalidArgument, "fit_line: abscissae coincide");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

}  // namespace epberry
