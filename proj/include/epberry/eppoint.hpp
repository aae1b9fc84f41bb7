#pragma once

// Exceptional-point location, Jordan chains and the linearized gap mu(X).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "epberry/hamiltonians.hpp"
#include "epberry/numerics.hpp"
#include "epberry/spectral.hpp"

namespace epberry {

struct LocateOptions {
  std::pair<std::size_t, std::size_t> plane{0, 1};  // coordinates varied by Newton
  int max_iterations = 50;
  double relative_step = 1e-6;     // central-difference step for the Jacobian
  double p_tolerance = 1e-14;      // |p| <= p_tolerance * ||H||^2
  double gap_tolerance = 1e-7;
};

struct LocateResult {
  RealVector x_ep;
  cplx e_ep;
  int iterations = 0;
  std::vector<RealVector> history;  // iterates, starting with the guess
  std::vector<double> p_history;    // |p| at each iterate
};

namespace detail {

struct PairScalars {
  cplx s;  // (E_n + E_{n+1}) / 2
  cplx p;  // (E_{n+1} - E_n)^2 / 4
  double gap;
};

/// s and p of the two eigenvalues closest to `near`.
inline PairScalars pair_scalars(const ComplexMatrix& h, cplx near) {
  const auto ev = eigenvalues(h);
  std::size_t i0 = 0, i1 = 1;
  if (std::abs(ev[i1] - near) < std::abs(ev[i0] - near)) std::swap(i0, i1);
  for (std::size_t k = 2; k < ev.size(); ++k) {
    const double d = std::abs(ev[k] - near);
    if (d < std::abs(ev[i0] - near)) {
      i1 = i0;
      i0 = k;
    } else if (d < std::abs(ev[i1] - near)) {
      i1 = k;
    }
  }
  const cplx d = ev[i1] - ev[i0];
  return {0.5 * (ev[i0] + ev[i1]), 0.25 * d * d, std::abs(d)};
}

/// Mean of the two closest eigenvalues of h.
inline cplx closest_pair_center(const ComplexMatrix& h) {
  const auto ev = eigenvalues(h);
  double best = std::numeric_limits<double>::infinity();
  cplx c{0.0};
  for (std::size_t i = 0; i < ev.size(); ++i)
    for (std::size_t j = i + 1; j < ev.size(); ++j)
      if (std::abs(ev[i] - ev[j]) < best) {
        best = std::abs(ev[i] - ev[j]);
        c = 0.5 * (ev[i] + ev[j]);
      }
  return c;
}

}  // namespace detail

/// Newton iteration on (Re p, Im p) with p = (E_{n+1} - E_n)^2 / 4, which is
/// smooth through the exceptional point even though E_n, E_{n+1} are not.
/// The pair is the two eigenvalues closest to `near`, re-centred on their
/// mean each iteration. For m > 2 only the coordinates in opt.plane move.
inline LocateResult locate_ep(const HamiltonianFamily& family, const RealVector& guess,
                              cplx near, const LocateOptions& opt = {}) {
  const std::size_t m = family.param_count();
  const auto [j1, j2] = opt.plane;
  if (j1 == j2 || j1 >= m || j2 >= m) fail(ErrorKind::InvalidArgument, "locate_ep: invalid plane");
  if (static_cast<std::size_t>(guess.size()) != m)
    fail(ErrorKind::InvalidArgument, "locate_ep: guess has wrong dimension");

  cplx s_ref = near;

  LocateResult res;
  RealVector x = guess;
  const std::array<Eigen::Index, 2> coords{static_cast<Eigen::Index>(j1),
                                           static_cast<Eigen::Index>(j2)};
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const ComplexMatrix h = family.evaluate(x);
    const auto ps = detail::pair_scalars(h, s_ref);
    s_ref = ps.s;
    res.history.push_back(x);
    res.p_history.push_back(std::abs(ps.p));
    const double hn = h.norm();
    if (std::abs(ps.p) <= opt.p_tolerance * hn * hn && ps.gap <= opt.gap_tolerance) {
      res.x_ep = x;
      res.e_ep = ps.s;
      res.iterations = it;
      return res;
    }
    if (it == opt.max_iterations) break;

    Eigen::Matrix2d jac;
    for (int c = 0; c < 2; ++c) {
      const Eigen::Index j = coords[static_cast<std::size_t>(c)];
      const double step = opt.relative_step * std::max(1.0, std::abs(x(j)));
      RealVector xp = x, xm = x;
      xp(j) += step;
      xm(j) -= step;
      const cplx dp = (detail::pair_scalars(family.evaluate(xp), s_ref).p -
                       detail::pair_scalars(family.evaluate(xm), s_ref).p) /
                      (2.0 * step);
      jac(0, c) = dp.real();
      jac(1, c) = dp.imag();
    }
    const double det = jac.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-14 * jac.squaredNorm())
      fail(ErrorKind::NonConvergence, "locate_ep: Jacobian singular (plane tangent to the EP set)");
    const Eigen::Vector2d delta = jac.partialPivLu().solve(Eigen::Vector2d(ps.p.real(), ps.p.imag()));
    x(coords[0]) -= delta(0);
    x(coords[1]) -= delta(1);
    if (!x.allFinite()) break;
  }
  std::ostringstream msg;
  msg << "Newton did not converge in " << opt.max_iterations << " iterations (|p| = "
      << res.p_history.back() << ")";
  fail(ErrorKind::NonConvergence, msg.str());
}

/// Pair given by sorted index at the guess.
inline LocateResult locate_ep(const HamiltonianFamily& family, const RealVector& guess,
                              PairSelector sel, const LocateOptions& opt = {}) {
  if (static_cast<std::size_t>(guess.size()) != family.param_count())
    fail(ErrorKind::InvalidArgument, "locate_ep: guess has wrong dimension");
  const auto ev0 = eigenvalues(family.evaluate(guess));
  if (sel.lower + 1 >= ev0.size()) fail(ErrorKind::InvalidArgument, "locate_ep: pair out of range");
  return locate_ep(family, guess, 0.5 * (ev0[sel.lower] + ev0[sel.lower + 1]), opt);
}

/// Pair (n, n+1) holding the two eigenvalues of H(x) closest to e; fails if
/// they are not adjacent in sorted order.
inline PairSelector pair_near(const HamiltonianFamily& family, const RealVector& x, cplx e) {
  const auto ev = eigenvalues(family.evaluate(x));
  std::vector<std::size_t> idx(ev.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(ev[a] - e) < std::abs(ev[b] - e); });
  const std::size_t lo = std::min(idx[0], idx[1]), hi = std::max(idx[0], idx[1]);
  if (hi != lo + 1)
    fail(ErrorKind::InvalidArgument,
         "pair_near: the two eigenvalues closest to E are not adjacent in sorted order");
  return {lo};
}

/// Jordan chain data at an exceptional point, normalized so that
///   <tchi0|chi0> = 0, <tchi1|chi0> = <tchi0|chi1> = 1, <tchi1|chi1> = 0.
struct JordanData {
  RealVector x_ep;
  cplx e_ep;
  ComplexVector chi0, chi1;    // right chain
  ComplexVector tchi0, tchi1;  // left chain
  ComplexVector mu_grad;       // <tchi0| dH/dX_j |chi0>

  struct Residuals {
    double sigma_min = 0, sigma_second = 0;
    double right_eigen = 0, right_chain = 0;  // relative to ||H_EP||
    double left_eigen = 0, left_chain = 0;
    double orthogonality = 0;                 // |<tchi0|chi0>|
    double norm_10 = 0, norm_01 = 0, norm_11 = 0;  // |<tchi1|chi0> - 1|, ...
  } residuals;
};

struct ChainOptions {
  /// Multiplies the SVD eigenvector before normalization; any nonzero value
  /// gives an equally valid chain (used to probe gauge independence).
  cplx initial_scale{1.0, 0.0};
  double sigma_min_tolerance = 1e-8;
  double sigma_second_minimum = 1e-3;
};

namespace detail {

inline void first_component_real_positive(ComplexVector& v) {
  const double big = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12 * big) {
      v *= std::conj(v(i)) / std::abs(v(i));
      return;
    }
  }
}

inline void fill_residuals(const ComplexMatrix& h, JordanData& jd) {
  const Eigen::Index n = h.rows();
  const ComplexMatrix a = h - jd.e_ep * ComplexMatrix::Identity(n, n);
  const double hn = std::max(h.norm(), 1e-300);
  auto& r = jd.residuals;
  r.right_eigen = (a * jd.chi0).norm() / hn;
  r.right_chain = (a * jd.chi1 - jd.chi0).norm() / hn;
  r.left_eigen = (a.transpose() * jd.tchi0).norm() / hn;
  r.left_chain = (a.transpose() * jd.tchi1 - jd.tchi0).norm() / hn;
  r.orthogonality = std::abs(pair(jd.tchi0, jd.chi0));
  r.norm_10 = std::abs(pair(jd.tchi1, jd.chi0) - 1.0);
  r.norm_01 = std::abs(pair(jd.tchi0, jd.chi1) - 1.0);
  r.norm_11 = std::abs(pair(jd.tchi1, jd.chi1));
}

}  // namespace detail

/// Right and left Jordan chains of the defective double eigenvalue e_ep of
/// H(x_ep). For symmetric families the left chain is the right chain itself
/// (bilinear pairing), which fixes the gauge up to a sign.
inline JordanData jordan_chains(const HamiltonianFamily& family, const RealVector& x_ep, cplx e_ep,
                                const ChainOptions& opt = {}) {
  const ComplexMatrix h = family.evaluate(x_ep);
  const Eigen::Index n = h.rows();
  const ComplexMatrix a = h - e_ep * ComplexMatrix::Identity(n, n);
  const auto sv = svd_smallest(a);
  const double scale = std::max(1.0, h.norm());
  if (sv.sigma_min > opt.sigma_min_tolerance * scale) {
    std::ostringstream msg;
    msg << "jordan_chains: E is not an eigenvalue at X (sigma_min = " << sv.sigma_min << ")";
    fail(ErrorKind::NotSimpleEP, msg.str());
  }
  if (sv.sigma_second < opt.sigma_second_minimum) {
    std::ostringstream msg;
    msg << "jordan_chains: second singular value " << sv.sigma_second
        << " too small (diabolic point or higher-order degeneracy)";
    fail(ErrorKind::NotSimpleEP, msg.str());
  }

  JordanData jd;
  jd.x_ep = x_ep;
  jd.e_ep = e_ep;
  jd.residuals.sigma_min = sv.sigma_min;
  jd.residuals.sigma_second = sv.sigma_second;

  ComplexVector chi0 = sv.right;
  detail::first_component_real_positive(chi0);
  chi0 *= opt.initial_scale;
  const double chain_tol = 1e-8;
  ComplexVector chi1;
  try {
    chi1 = solve_min_norm(a, chi0, chain_tol);
  } catch (const Error& e) {
    fail(ErrorKind::NotSimpleEP, std::string("jordan_chains: no associated vector: ") + e.what());
  }

  if (family.is_symmetric()) {
    const cplx c = pair(chi0, chi1);
    if (std::abs(c) < 1e-10)
      fail(ErrorKind::NotSimpleEP, "jordan_chains: inconsistent chain, relocate the EP first");
    const cplx root = std::sqrt(c);
    chi0 /= root;
    chi1 /= root;
    const cplx beta = pair(chi1, chi1);
    chi1 -= 0.5 * beta * chi0;
    jd.chi0 = chi0;
    jd.chi1 = chi1;
    jd.tchi0 = chi0;
    jd.tchi1 = chi1;
  } else {
    ComplexVector tchi0 = sv.left.conjugate();
    ComplexVector tchi1;
    try {
      tchi1 = solve_min_norm(a.transpose(), tchi0, chain_tol);
    } catch (const Error& e) {
      fail(ErrorKind::NotSimpleEP, std::string("jordan_chains: no left associated vector: ") + e.what());
    }
    const cplx c = pair(tchi0, chi1);
    if (std::abs(c) < 1e-10)
      fail(ErrorKind::NotSimpleEP, "jordan_chains: inconsistent chain, relocate the EP first");
    chi0 /= c;
    chi1 /= c;
    const cplx c2 = pair(tchi1, chi0);
    tchi0 /= c2;
    tchi1 /= c2;
    const cplx beta = pair(tchi1, chi1);
    chi1 -= beta * chi0;
    jd.chi0 = chi0;
    jd.chi1 = chi1;
    jd.tchi0 = tchi0;
    jd.tchi1 = tchi1;
  }

  const std::size_t m = family.param_count();
  jd.mu_grad.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j)
    jd.mu_grad(static_cast<Eigen::Index>(j)) = pair(jd.tchi0, family.derivative(x_ep, j), jd.chi0);

  detail::fill_residuals(h, jd);
  const auto& r = jd.residuals;
  if (r.norm_10 > 1e-8 || r.norm_01 > 1e-8 || r.norm_11 > 1e-8)
    fail(ErrorKind::NotSimpleEP, "jordan_chains: normalization could not be enforced");
  return jd;
}

/// Another valid normalization of the same chains:
/// chi0 -> a chi0, chi1 -> a (chi1 + k chi0), tchi0 -> tchi0 / a,
/// tchi1 -> (tchi1 - k tchi0) / a.
inline JordanData regauge(const JordanData& jd, cplx a, cplx k) {
  JordanData out = jd;
  out.chi0 = a * jd.chi0;
  out.chi1 = a * (jd.chi1 + k * jd.chi0);
  out.tchi0 = jd.tchi0 / a;
  out.tchi1 = (jd.tchi1 - k * jd.tchi0) / a;
  return out;
}

/// mu(X) = sum_j mu_grad_j (X_j - X_EP_j), the linearization of p at the EP.
inline cplx mu_at(const JordanData& jd, const RealVector& x) {
  if (x.size() != jd.x_ep.size()) fail(ErrorKind::InvalidArgument, "mu_at: wrong dimension");
  cplx mu = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) mu += jd.mu_grad(j) * (x(j) - jd.x_ep(j));
  return mu;
}

/// Orthonormal basis (columns) of the tangent space {mu = 0} of the EP set;
/// m - 2 columns, none for m = 2.
inline RealMatrix ep_tangent(const JordanData& jd) {
  const Eigen::Index m = jd.mu_grad.size();
  RealMatrix rows(2, m);
  rows.row(0) = jd.mu_grad.real().transpose();
  rows.row(1) = jd.mu_grad.imag().transpose();
  Eigen::JacobiSVD<RealMatrix> svd(rows, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 2 || sv(1) <= 1e-10 * sv(0))
    fail(ErrorKind::InvalidArgument, "ep_tangent: degenerate EP parametrization");
  return svd.matrixV().rightCols(m - 2);
}

/// Ratio psi^T psi / (2 sqrt(mu(X))) for the eigenvector of the coalescing
/// pair at X normalized by <tchi1|psi> = 1; tends to 1 at the EP for symmetric
/// families. Of the two branches the one with the ratio closer to +1 is
/// returned (the other tends to -1).
inline cplx symmetric_overlap_ratio(const HamiltonianFamily& family, const JordanData& jd,
                                    const RealVector& x) {
  const auto es = eigensystem_at(family, x, 0.0);
  std::vector<std::size_t> idx(es.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(es.values[a] - jd.e_ep) < std::abs(es.values[b] - jd.e_ep);
  });
  const cplx root = std::sqrt(mu_at(jd, x));
  cplx best{0.0};
  for (int b = 0; b < 2; ++b) {
    ComplexVector psi = es.right[idx[static_cast<std::size_t>(b)]];
    psi /= pair(jd.tchi1, psi);
    const cplx ratio = pair(psi, psi) / (2.0 * root);
    if (b == 0 || std::abs(ratio - 1.0) < std::abs(best - 1.0)) best = ratio;
  }
  return best;
}

}  // namespace epberry
