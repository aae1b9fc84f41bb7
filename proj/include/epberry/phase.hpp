#pragma once

// Geometric phase of a tracked level by three independent methods, the
// double-cycle decomposition diagnostic, and the dynamical phase.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "epberry/eppoint.hpp"
#include "epberry/numerics.hpp"
#include "epberry/spectral.hpp"
#include "epberry/versal.hpp"

namespace epberry {

enum class PhaseMethod { DoubleCycle, Winding, Versal };

inline const char* to_string(PhaseMethod m) {
  switch (m) {
    case PhaseMethod::DoubleCycle: return "double_cycle";
    case PhaseMethod::Winding: return "winding";
    case PhaseMethod::Versal: return "versal";
  }
  return "?";
}

struct PhaseDecomposition {
  cplx i1, i2, i3;
};

struct PhaseResult {
  cplx gamma;  // real part in (-pi, pi], -pi reported as +pi
  PhaseMethod method = PhaseMethod::DoubleCycle;
  double discretization_error = 0.0;
  std::size_t samples = 0;  // per cycle, after refinement
  std::optional<PhaseDecomposition> decomposition;
};

struct PhaseOptions {
  std::size_t cycles = 2;          // double-cycle method only; 1 for loops without swap
  double overlap_target = 0.25;    // refine until |<l_k|r_k+1> - 1| stays below this
  bool decomposition = false;      // versal method: also report (I1, I2, I3)
  TrackOptions track;
};

namespace detail {

/// Wilson-loop phase of branch b over the whole (closed) track:
///   i * sum_k 1/2 [Log<l_k|r_k+1> - Log<l_k+1|r_k>],
/// evaluated as i Log(W) - (i/2) sum_k Log(<l_k|r_k+1><l_k+1|r_k>) where W is
/// the closed Wilson product. Both pieces are gauge invariant; the symmetric
/// form cancels the O(1/N) error of the one-sided sum.
inline cplx wilson_phase(const BranchTrack& track, int b = 0) {
  const std::size_t total = track.size() - 1;
  cplx w{1.0};
  cplx corr{0.0};
  for (std::size_t k = 0; k < total; ++k) {
    const cplx zf = pair(track.left(k, b), track.right(k + 1, b));
    const cplx zb = pair(track.left(k + 1, b), track.right(k, b));
    const cplx q = zf * zb;
    if (std::abs(q - 1.0) >= 0.5) {
      std::ostringstream msg;
      msg << "phase: overlap near the logarithm branch cut at t = " << track.samples()[k].t;
      fail(ErrorKind::TrackingFailure, msg.str());
    }
    w *= zf;
    corr += std::log(q);
  }
  w *= pair(track.left(total, b), track.right(0, b));  // closure psi_end -> psi_0
  const cplx iu(0.0, 1.0);
  return iu * std::log(w) - 0.5 * iu * corr;
}

/// Shift a's real part by a multiple of 2 pi to be closest to b.
inline cplx align_to(cplx a, cplx b) {
  const double k = std::round((b.real() - a.real()) / (2.0 * kPi));
  return {a.real() + 2.0 * kPi * k, a.imag()};
}

inline BranchTrack closed_track(const HamiltonianFamily& family, const ParameterLoop& loop,
                                PairSelector sel, const PhaseOptions& opt) {
  BranchTrack t = track_pair(family, loop, sel, opt.cycles, opt.track);
  if (!is_identity(t.total_monodromy())) {
    if (opt.cycles == 1)
      fail(ErrorKind::InvalidArgument,
           "phase: the loop exchanges the pair after one cycle; use the double cycle");
    fail(ErrorKind::TrackingFailure, "phase: the pair is not restored after two cycles");
  }
  return adaptive_refine(t, opt.overlap_target, opt.track);
}

}  // namespace detail

/// Complex Wilson product of branch b over the closed track (gauge invariant).
inline cplx wilson_product(const BranchTrack& track, int b = 0) {
  const std::size_t total = track.size() - 1;
  cplx w{1.0};
  for (std::size_t k = 0; k < total; ++k) w *= pair(track.left(k, b), track.right(k + 1, b));
  return w * pair(track.left(total, b), track.right(0, b));
}

/// Phase from an already tracked closed loop (no refinement, no error estimate).
inline cplx phase_from_track(const BranchTrack& track, int b = 0) {
  return principal_phase(detail::wilson_phase(track, b));
}

/// Double-cycle discrete connection integral with Richardson extrapolation
/// from N and 2N samples per cycle.
inline PhaseResult phase_double_cycle(const HamiltonianFamily& family, const ParameterLoop& loop,
                                      PairSelector sel, const PhaseOptions& opt = {}) {
  const BranchTrack coarse = detail::closed_track(family, loop, sel, opt);
  const std::size_t n = coarse.samples_per_cycle();
  const BranchTrack fine = detail::closed_track(family, loop.with_samples(2 * n), sel, opt);
  const cplx g1 = detail::wilson_phase(coarse);
  const cplx g2 = detail::wilson_phase(fine);
  const cplx g1a = detail::align_to(g1, g2);
  PhaseResult r;
  r.method = PhaseMethod::DoubleCycle;
  r.gamma = principal_phase((4.0 * g2 - g1a) / 3.0);
  r.discretization_error = std::abs(g2 - g1a);
  r.samples = fine.samples_per_cycle();
  return r;
}

namespace detail {

/// Winding number of w = psi^T psi over the closed track, with the tracked
/// vectors rescaled by exp(-L k / total) so that the frame closes exactly.
inline int symmetric_winding(const BranchTrack& track, std::size_t stride) {
  const std::size_t total = track.size() - 1;
  const cplx lam = pair(track.left(0, 0), track.right(total, 0));
  const cplx l = std::log(lam);
  auto w_at = [&](std::size_t k) {
    const cplx g = std::exp(-l * static_cast<double>(k) / static_cast<double>(total));
    const ComplexVector& psi = track.right(k, 0);
    const cplx w = g * g * pair(psi, psi);
    if (std::abs(w) < 1e-10 * psi.squaredNorm() * std::norm(g))
      fail(ErrorKind::DegeneratePoint, "winding: psi^T psi passes through zero (loop through EP?)");
    return w;
  };
  double acc = 0.0;
  cplx prev = w_at(0);
  for (std::size_t k = stride; k <= total; k += stride) {
    const cplx cur = w_at(k);
    const double step = std::arg(cur / prev);
    if (std::abs(step) > 0.5 * kPi)
      fail(ErrorKind::TrackingFailure, "winding: step too large, refine");
    acc += step;
    prev = cur;
  }
  return static_cast<int>(std::lround(acc / (2.0 * kPi)));
}

}  // namespace detail

/// Symmetric families only: gamma = (i/2) * change of ln(psi^T psi) over the
/// double cycle = -pi * winding number.
inline PhaseResult phase_winding_symmetric(const HamiltonianFamily& family,
                                           const ParameterLoop& loop, PairSelector sel,
                                           const PhaseOptions& opt = {}) {
  if (!family.is_symmetric())
    fail(ErrorKind::InvalidArgument, "winding method is for symmetric families only");
  PhaseOptions o = opt;
  o.cycles = 2;
  BranchTrack track = detail::closed_track(family, loop, sel, o);
  int w = 0;
  for (;;) {
    try {
      w = detail::symmetric_winding(track, 1);
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TrackingFailure || 2 * track.samples_per_cycle() > kMaxTrackSamples)
        throw;
      track = detail::closed_track(family, track.loop().with_samples(2 * track.samples_per_cycle()),
                                   sel, o);
    }
  }
  int w_half = w;
  try {
    w_half = detail::symmetric_winding(track, 2);
  } catch (const Error&) {
  }
  PhaseResult r;
  r.method = PhaseMethod::Winding;
  r.gamma = principal_phase(cplx(-kPi * w, 0.0));
  r.discretization_error = kPi * std::abs(w - w_half);
  r.samples = track.samples_per_cycle();
  return r;
}

namespace detail {

inline PhaseDecomposition decompose(const VersalFrame& f) {
  const std::size_t total = f.samples.size() - 1;
  const double dt = 1.0 / static_cast<double>(f.samples_per_cycle);
  const cplx iu(0.0, 1.0);
  cplx i1{0.0}, i2{0.0};
  for (std::size_t k = 0; k < total; ++k) {
    const auto& v = f.samples[k];
    i1 += std::log(f.samples[k + 1].sqrt_p / v.sqrt_p);
    i2 += (pair(v.tchi0, v.dchi0) + v.p * pair(v.tchi1, v.dchi1)) / (2.0 * v.sqrt_p);
  }
  return {0.5 * iu * i1, iu * i2 * dt, versal_residual_integral(f)};
}

}  // namespace detail

/// Exact single-cycle formula: gamma = sigma pi + i * integral over C of
/// (<tchi0|dchi1> + <tchi1|dchi0>), sigma = winding of p over the cycle.
inline PhaseResult phase_versal(const HamiltonianFamily& family, const ParameterLoop& loop,
                                const JordanData& jd, PairSelector sel,
                                const PhaseOptions& opt = {}) {
  BranchTrack track = track_pair(family, loop, sel, 1, opt.track);
  if (!is_swap(track.total_monodromy()))
    fail(ErrorKind::InvalidArgument, "versal method: the loop does not encircle the EP once");
  track = adaptive_refine(track, opt.overlap_target, opt.track);
  const VersalFrame frame = versal_along_loop(track, jd);
  const int sigma = p_winding(frame);
  if (std::abs(sigma) != 1)
    fail(ErrorKind::InvalidArgument, "versal method: p does not wind once around zero");
  const cplx res = versal_residual_integral(frame);
  const cplx half = versal_residual_integral(frame, 2);
  PhaseResult r;
  r.method = PhaseMethod::Versal;
  r.gamma = principal_phase(cplx(sigma * kPi, 0.0) + res);
  r.discretization_error = std::abs(res - half);
  r.samples = track.samples_per_cycle();
  if (opt.decomposition) {
    BranchTrack t2 = track_pair(family, track.loop(), sel, 2, opt.track);
    r.decomposition = detail::decompose(versal_along_loop(t2, jd));
  }
  return r;
}

/// (I1, I2, I3) over the double cycle; gamma = I1 + I2 + I3 / 2.
inline PhaseDecomposition phase_decomposition(const HamiltonianFamily& family,
                                              const ParameterLoop& loop, const JordanData& jd,
                                              PairSelector sel, const PhaseOptions& opt = {}) {
  BranchTrack t = track_pair(family, loop, sel, 2, opt.track);
  t = adaptive_refine(t, opt.overlap_target, opt.track);
  return detail::decompose(versal_along_loop(t, jd));
}

/// delta = -(1/hbar) * integral of E_b(t) dt over the track, with one cycle
/// taking `period` time units (trapezoid rule).
inline cplx dynamical_phase(const BranchTrack& track, double period, double hbar = 1.0,
                            int b = 0) {
  if (!(hbar > 0.0)) fail(ErrorKind::InvalidArgument, "dynamical_phase: hbar must be positive");
  const std::size_t total = track.size() - 1;
  cplx sum = 0.5 * (track.value(0, b) + track.value(total, b));
  for (std::size_t k = 1; k < total; ++k) sum += track.value(k, b);
  const double dt = period / static_cast<double>(track.samples_per_cycle());
  return -sum * dt / hbar;
}

}  // namespace epberry
