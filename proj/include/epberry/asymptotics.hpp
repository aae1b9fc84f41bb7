#pragma once

// Correction constant a of gamma = +-pi + i a eps^2 + O(eps^3) for small loops
// X = X_EP + eps * Xhat(t): resolvent form, level-interaction (spectral) form,
// direct eps-sweeps and the divergence as a spectator approaches the EP.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "epberry/eppoint.hpp"
#include "epberry/numerics.hpp"
#include "epberry/parallel.hpp"
#include "epberry/phase.hpp"
#include "epberry/spectral.hpp"

namespace epberry {

inline constexpr double kMaxResolventCondition = 1e8;
inline constexpr double kSweepRoundoffFloor = 1e-10;

struct Spectator {
  std::size_t level = 0;  // index in the sorted spectrum at X_EP
  cplx energy;
  ComplexVector right, left;  // <left|right> = 1
};

/// Levels of H(X_EP) other than the coalescing pair, with separation checks.
inline std::vector<Spectator> spectators(const HamiltonianFamily& family, const JordanData& jd,
                                         double min_separation = 1e-6,
                                         double min_distance = 1e-3) {
  const auto es = eigensystem_at(family, jd.x_ep, 0.0);
  std::vector<std::size_t> idx(es.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(es.values[a] - jd.e_ep) < std::abs(es.values[b] - jd.e_ep);
  });
  std::vector<Spectator> out;
  for (std::size_t i = 2; i < idx.size(); ++i) {
    const std::size_t k = idx[i];
    Spectator s{k, es.values[k], es.right[k], es.left[k]};
    if (std::abs(s.energy - jd.e_ep) < min_distance) {
      std::ostringstream msg;
      msg << "spectator level " << k << " within " << std::abs(s.energy - jd.e_ep)
          << " of the EP eigenvalue (near triple degeneracy)";
      fail(ErrorKind::IllConditioned, msg.str());
    }
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const Spectator& a, const Spectator& b) { return a.level < b.level; });
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (std::abs(out[i].energy - out[j].energy) < min_separation)
        fail(ErrorKind::IllConditioned, "spectator levels are degenerate at the EP");
  return out;
}

/// || I - |chi0><tchi1| - |chi1><tchi0| - sum_k |psi_k><tpsi_k| ||
inline double identity_resolution_residual(const JordanData& jd,
                                           const std::vector<Spectator>& spec) {
  const Eigen::Index n = jd.chi0.size();
  ComplexMatrix r = ComplexMatrix::Identity(n, n) - outer(jd.chi0, jd.tchi1) - outer(jd.chi1, jd.tchi0);
  for (const auto& s : spec) r -= outer(s.right, s.left);
  return r.norm();
}

/// || H_EP - Jordan-form reconstruction || relative to max(1, ||H_EP||).
inline double jordan_reconstruction_residual(const HamiltonianFamily& family, const JordanData& jd,
                                             const std::vector<Spectator>& spec) {
  const ComplexMatrix h = family.evaluate(jd.x_ep);
  ComplexMatrix r = h - outer(jd.chi0, jd.tchi0) -
                    jd.e_ep * (outer(jd.chi0, jd.tchi1) + outer(jd.chi1, jd.tchi0));
  for (const auto& s : spec) r -= s.energy * outer(s.right, s.left);
  return r.norm() / std::max(1.0, h.norm());
}

struct CorrectionResult {
  cplx value;
  double error_estimate = 0.0;  // |a(N) - a(N/2)|
};

struct LevelContribution {
  std::size_t level = 0;
  cplx energy;
  cplx contribution;
};

struct SpectralCorrection {
  cplx value;
  double error_estimate = 0.0;
  std::vector<LevelContribution> per_level;
};

namespace detail {

struct ContourSample {
  ComplexMatrix h1, dh1;  // H_1(Xhat(t)) and H_1(Xhat'(t))
};

inline std::vector<ContourSample> contour_samples(const HamiltonianFamily& family,
                                                  const JordanData& jd, const LoopShape& shape,
                                                  std::size_t n) {
  if (n < 4 || n % 2) fail(ErrorKind::InvalidArgument, "correction: N must be even and >= 4");
  if (shape.dim != family.param_count())
    fail(ErrorKind::InvalidArgument, "correction: shape dimension does not match family");
  std::vector<ComplexMatrix> d(family.param_count());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = family.derivative(jd.x_ep, j);
  std::vector<ContourSample> out(n);
  parallel_for(n, [&](std::size_t k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    const RealVector x = shape.point(t), v = shape.velocity(t);
    ComplexMatrix h1 = ComplexMatrix::Zero(d[0].rows(), d[0].cols());
    ComplexMatrix dh1 = h1;
    for (std::size_t j = 0; j < d.size(); ++j) {
      h1 += x(static_cast<Eigen::Index>(j)) * d[j];
      dh1 += v(static_cast<Eigen::Index>(j)) * d[j];
    }
    out[k] = {std::move(h1), std::move(dh1)};
  });
  return out;
}

/// Periodic trapezoid sums over all samples and over every other sample.
template <typename F>
std::pair<cplx, cplx> trapezoid_pair(std::size_t n, F&& term) {
  std::vector<cplx> vals(n);
  parallel_for(n, [&](std::size_t k) { vals[k] = term(k); });
  cplx full{0.0}, half{0.0};
  for (std::size_t k = 0; k < n; ++k) {
    full += vals[k];
    if (k % 2 == 0) half += vals[k];
  }
  return {full / static_cast<double>(n), half * 2.0 / static_cast<double>(n)};
}

}  // namespace detail

/// Resolvent form with G = H_EP - E_EP + |chi1><tchi1|:
///   a = integral of 2<tchi0|H1 (G^-3 - |chi1><tchi1|) dH1|chi0>
///       + <tchi0|H1 G^-2 dH1|chi1> + <tchi1|H1 G^-2 dH1|chi0>
/// over the unit shape, by the periodic trapezoid rule.
inline CorrectionResult correction_direct(const HamiltonianFamily& family, const JordanData& jd,
                                          const LoopShape& shape, std::size_t n = 256) {
  const ComplexMatrix h = family.evaluate(jd.x_ep);
  const Eigen::Index dim = h.rows();
  const ComplexMatrix g = h - jd.e_ep * ComplexMatrix::Identity(dim, dim) + outer(jd.chi1, jd.tchi1);
  const auto sv = Eigen::JacobiSVD<ComplexMatrix>(g).singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond <= kMaxResolventCondition)) {
    std::ostringstream msg;
    msg << "correction: G ill-conditioned (cond = " << cond << "), near triple degeneracy";
    fail(ErrorKind::IllConditioned, msg.str());
  }
  const Eigen::PartialPivLU<ComplexMatrix> lu(g);
  const auto samples = detail::contour_samples(family, jd, shape, n);
  auto term = [&](std::size_t k) {
    const auto& cs = samples[k];
    const ComplexVector u0 = cs.dh1 * jd.chi0;
    const ComplexVector u1 = cs.dh1 * jd.chi1;
    const ComplexVector g1u0 = lu.solve(u0);
    const ComplexVector g2u0 = lu.solve(g1u0);
    ComplexVector v = lu.solve(g2u0);
    v -= jd.chi1 * pair(jd.tchi1, u0);
    const ComplexVector g2u1 = lu.solve(lu.solve(u1));
    const ComplexVector l0 = cs.h1.transpose() * jd.tchi0;
    const ComplexVector l1 = cs.h1.transpose() * jd.tchi1;
    return 2.0 * pair(l0, v) + pair(l0, g2u1) + pair(l1, g2u0);
  };
  const auto [full, half] = detail::trapezoid_pair(n, term);
  return {full, std::abs(full - half)};
}

/// Level-interaction form: sum over spectators k with d_k = E_k - E_EP of
///   2<tchi0|H1|psi_k><tpsi_k|dH1|chi0> / d_k^3
///   + (<tchi1|H1|psi_k><tpsi_k|dH1|chi0> + <tchi0|H1|psi_k><tpsi_k|dH1|chi1>) / d_k^2.
inline SpectralCorrection correction_spectral(const HamiltonianFamily& family,
                                              const JordanData& jd, const LoopShape& shape,
                                              std::size_t n = 256) {
  const auto spec = spectators(family, jd);
  const auto samples = detail::contour_samples(family, jd, shape, n);
  SpectralCorrection out;
  out.value = 0.0;
  for (const auto& s : spec) {
    const cplx d = s.energy - jd.e_ep;
    auto term = [&](std::size_t k) {
      const auto& cs = samples[k];
      const cplx a0 = pair(jd.tchi0, cs.h1, s.right);
      const cplx a1 = pair(jd.tchi1, cs.h1, s.right);
      const cplx b0 = pair(s.left, cs.dh1, jd.chi0);
      const cplx b1 = pair(s.left, cs.dh1, jd.chi1);
      return 2.0 * a0 * b0 / (d * d * d) + (a1 * b0 + a0 * b1) / (d * d);
    };
    const auto [full, half] = detail::trapezoid_pair(n, term);
    out.per_level.push_back({s.level, s.energy, full});
    out.value += full;
    out.error_estimate += std::abs(full - half);
  }
  return out;
}

struct SweepEntry {
  double epsilon = 0.0;
  cplx gamma;
  cplx deviation;  // gamma - pi, real part wrapped into (-pi, pi]
  double error_estimate = 0.0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  cplx fitted_coefficient{std::numeric_limits<double>::quiet_NaN(), 0.0};
  bool resolved = false;  // every |gamma - pi| above its discretization error
  std::string note;
};

/// gamma(eps) by the double-cycle method on X_EP + eps * shape. The exponent
/// is the least-squares slope of log|gamma - pi| against log eps; the
/// coefficient c(eps) = (gamma - pi) / (i eps^2) is extrapolated linearly to
/// eps = 0 from the two smallest eps, removing the O(eps^3) term.
inline SweepResult epsilon_sweep(const HamiltonianFamily& family, const JordanData& jd,
                                 const LoopShape& shape, std::vector<double> eps_list,
                                 std::size_t n = 1024, const PhaseOptions& opt = {}) {
  if (eps_list.empty()) fail(ErrorKind::InvalidArgument, "epsilon_sweep: empty epsilon list");
  std::sort(eps_list.begin(), eps_list.end());
  for (double e : eps_list)
    if (!(e > 0.0)) fail(ErrorKind::InvalidArgument, "epsilon_sweep: epsilon must be positive");
  SweepResult res;
  res.entries.resize(eps_list.size());
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const ParameterLoop loop{jd.x_ep, shape, eps_list[i], n};
    const PairSelector sel = pair_near(family, loop.point(0.0), jd.e_ep);
    const PhaseResult pr = phase_double_cycle(family, loop, sel, opt);
    auto& e = res.entries[i];
    e.epsilon = eps_list[i];
    e.gamma = pr.gamma;
    e.deviation = cplx(wrap_angle(pr.gamma.real() - kPi), pr.gamma.imag());
    e.error_estimate = pr.discretization_error;
  }
  // the Richardson estimate itself sits at round-off when gamma is exactly pi,
  // so deviations must also clear an absolute floor
  res.resolved = true;
  for (const auto& e : res.entries)
    if (!(std::abs(e.deviation) > std::max(e.error_estimate, kSweepRoundoffFloor))) res.resolved = false;
  if (!res.resolved) {
    res.note = "gamma - pi not resolved above the discretization error; no eps^2 term detected "
               "(increase N if one is expected)";
    return res;
  }
  std::vector<double> lx, ly;
  for (const auto& e : res.entries) {
    lx.push_back(std::log(e.epsilon));
    ly.push_back(std::log(std::abs(e.deviation)));
  }
  if (lx.size() >= 2) res.fitted_exponent = fit_line(lx, ly).slope;
  const cplx iu(0.0, 1.0);
  const auto& e1 = res.entries[0];
  const cplx c1 = e1.deviation / (iu * e1.epsilon * e1.epsilon);
  if (res.entries.size() >= 2) {
    const auto& e2 = res.entries[1];
    const cplx c2 = e2.deviation / (iu * e2.epsilon * e2.epsilon);
    res.fitted_coefficient = (c1 * e2.epsilon - c2 * e1.epsilon) / (e2.epsilon - e1.epsilon);
  } else {
    res.fitted_coefficient = c1;
  }
  return res;
}

struct DivergenceEntry {
  double delta = 0.0;
  cplx a;
  std::vector<LevelContribution> per_level;
};

struct DivergenceReport {
  std::vector<DivergenceEntry> entries;  // in the order of the input list
  double slope = std::numeric_limits<double>::quiet_NaN();  // over the three smallest delta
  bool truncated = false;
  std::string note;
};

/// a(Delta) by the spectral form for a family whose EP (x_ep, e_ep) does not
/// move with Delta (gen3-like templates). Stops at the first Delta where the
/// resolvent becomes ill-conditioned.
inline DivergenceReport divergence_scan(const std::function<HamiltonianFamily(double)>& make,
                                        const RealVector& x_ep, cplx e_ep,
                                        std::vector<double> deltas, const LoopShape& shape,
                                        std::size_t n = 256) {
  if (deltas.empty()) fail(ErrorKind::InvalidArgument, "divergence_scan: empty delta list");
  for (double d : deltas)
    if (!(std::abs(d) >= 1e-2))
      fail(ErrorKind::InvalidArgument, "divergence_scan: |delta| must be at least 1e-2");
  std::sort(deltas.begin(), deltas.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  DivergenceReport rep;
  for (double d : deltas) {
    try {
      const HamiltonianFamily fam = make(d);
      const JordanData jd = jordan_chains(fam, x_ep, e_ep);
      correction_direct(fam, jd, shape, n);  // conditioning guard
      const auto sc = correction_spectral(fam, jd, shape, n);
      rep.entries.push_back({d, sc.value, sc.per_level});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IllConditioned && e.kind() != ErrorKind::NotSimpleEP) throw;
      rep.truncated = true;
      std::ostringstream msg;
      msg << "scan truncated at delta = " << d << ": " << e.what();
      rep.note = msg.str();
      break;
    }
  }
  if (rep.entries.size() >= 3) {
    std::vector<double> lx, ly;
    for (std::size_t i = rep.entries.size() - 3; i < rep.entries.size(); ++i) {
      lx.push_back(std::log(std::abs(rep.entries[i].delta)));
      ly.push_back(std::log(std::abs(rep.entries[i].a)));
    }
    rep.slope = fit_line(lx, ly).slope;
  }
  return rep;
}

}  // namespace epberry
