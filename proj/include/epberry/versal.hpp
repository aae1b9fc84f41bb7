#pragma once

// Smooth basis (chi0, chi1) of the invariant subspace of a tracked eigenvalue
// pair, together with s = (E_n + E_{n+1}) / 2 and p = (E_{n+1} - E_n)^2 / 4:
//
//   H chi0 = s chi0 + p chi1,   H chi1 = s chi1 + chi0,
//   <tchi0|chi0> = <tchi1|chi1> = 0,   <tchi1|chi0> = <tchi0|chi1> = 1.
//
// The frame is fixed per sample by chi1 = P r, where P is the spectral
// projector of the pair and r a fixed reference vector. Since P is smooth and
// single-valued on the loop, so is the frame; the eigenvectors are recovered
// as psi_{+-} = chi0 +- sqrt(p) chi1.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "epberry/eppoint.hpp"
#include "epberry/numerics.hpp"
#include "epberry/spectral.hpp"

namespace epberry {

struct VersalSample {
  double t = 0.0;
  RealVector point;
  cplx s, p, sqrt_p;
  ComplexVector chi0, chi1, tchi0, tchi1;
  // t-derivatives along the loop
  cplx ds, dsqrt_p;
  ComplexVector dchi0, dchi1;
  int plus_branch = 0;  // tracked branch with E = s + sqrt_p
};

struct VersalFrame {
  std::vector<VersalSample> samples;  // cycles * N + 1
  std::size_t samples_per_cycle = 0;
  std::size_t cycles = 1;
  double max_chain_residual = 0.0;    // H chi - s chi - ..., relative to ||H||
  double max_normalization_residual = 0.0;
};

struct VersalOptions {
  /// Reference r in chi1 = P r. Defaults to the conjugated sum of the two
  /// left eigenvectors at t = 0 (close to conj(tchi0) near the EP).
  std::optional<ComplexVector> reference;
};

namespace detail {

inline ComplexVector default_reference(const BranchTrack& track) {
  ComplexVector a = track.left(0, 0) / track.left(0, 0).norm();
  ComplexVector b = track.left(0, 1) / track.left(0, 1).norm();
  const cplx ph = a.dot(b);
  if (std::abs(ph) > 0.0) b *= std::conj(ph) / std::abs(ph);
  ComplexVector r = (a + b).conjugate();
  return r / r.norm();
}

}  // namespace detail

/// Versal frames at every sample of the track (one or two cycles).
inline VersalFrame versal_along_loop(const BranchTrack& track, const VersalOptions& opt = {}) {
  const auto& family = track.family();
  const auto& loop = track.loop();
  const std::size_t n = static_cast<std::size_t>(family.dim());
  const ComplexVector r = opt.reference ? *opt.reference : detail::default_reference(track);
  if (static_cast<std::size_t>(r.size()) != n)
    fail(ErrorKind::InvalidArgument, "versal: reference vector has wrong dimension");
  const ComplexMatrix id = ComplexMatrix::Identity(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(n));

  VersalFrame frame;
  frame.samples_per_cycle = track.samples_per_cycle();
  frame.cycles = track.cycles();
  frame.samples.reserve(track.size());
  cplx prev_root{0.0};
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto& ts = track.samples()[i];
    const auto& es = ts.system;
    VersalSample v;
    v.t = ts.t;
    v.point = es.point;
    const cplx e0 = track.value(i, 0), e1 = track.value(i, 1);
    v.s = 0.5 * (e0 + e1);
    v.p = 0.25 * (e1 - e0) * (e1 - e0);
    if (std::abs(v.p) == 0.0) fail(ErrorKind::DegeneratePoint, "versal: p vanishes on the loop");
    cplx root = std::sqrt(v.p);
    if (i > 0) {
      if (std::abs(root + prev_root) < std::abs(root - prev_root)) root = -root;
      if (std::abs(root - prev_root) >= 0.5 * std::abs(prev_root)) {
        std::ostringstream msg;
        msg << "versal: sqrt(p) continuation jump at t = " << v.t << ", refine the loop";
        fail(ErrorKind::TrackingFailure, msg.str());
      }
    }
    prev_root = root;
    v.sqrt_p = root;

    const int plus = std::abs(e0 - (v.s + root)) <= std::abs(e1 - (v.s + root)) ? 0 : 1;
    v.plus_branch = plus;
    const std::size_t kp = ts.level[static_cast<std::size_t>(plus)];
    const std::size_t km = ts.level[static_cast<std::size_t>(1 - plus)];
    const ComplexVector& psi_p = es.right[kp];
    const ComplexVector& psi_m = es.right[km];
    const ComplexVector& tpsi_p = es.left[kp];
    const ComplexVector& tpsi_m = es.left[km];
    const cplx rp = pair(tpsi_p, r), rm = pair(tpsi_m, r);
    const double floor = 1e-8 * r.norm();
    if (std::abs(rp) * psi_p.norm() < floor || std::abs(rm) * psi_m.norm() < floor)
      fail(ErrorKind::DegeneratePoint,
           "versal: reference vector is orthogonal to an eigenvector on the loop");

    // eigenvectors rescaled so that <tpsi+|psi+> = 2 sqrt_p, <tpsi-|psi-> = -2 sqrt_p
    const cplx alpha_p = 2.0 * root * rp, alpha_m = -2.0 * root * rm;
    const ComplexVector big_p = alpha_p * psi_p, big_m = alpha_m * psi_m;
    const ComplexVector tbig_p = tpsi_p / rp, tbig_m = tpsi_m / rm;
    v.chi0 = 0.5 * (big_p + big_m);
    v.chi1 = (big_p - big_m) / (2.0 * root);
    v.tchi0 = 0.5 * (tbig_p + tbig_m);
    v.tchi1 = (tbig_p - tbig_m) / (2.0 * root);

    // derivatives: dchi1 = dP r, dchi0 = (dH - ds) chi1 + (H - s) dchi1
    const ComplexMatrix h = family.evaluate(v.point);
    const ComplexMatrix dh = family.directional_derivative(v.point, loop.velocity(ts.t));
    const cplx de_p = pair(tpsi_p, dh, psi_p), de_m = pair(tpsi_m, dh, psi_m);
    v.ds = 0.5 * (de_p + de_m);
    v.dsqrt_p = 0.5 * (de_p - de_m);
    ComplexVector dpr = ComplexVector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < es.size(); ++k) {
      if (k == kp || k == km) continue;
      for (std::size_t j : {kp, km}) {
        const cplx gap = es.values[j] - es.values[k];
        dpr += es.right[k] * (pair(es.left[k], dh, es.right[j]) * pair(es.left[j], r) / gap);
        dpr += es.right[j] * (pair(es.left[j], dh, es.right[k]) * pair(es.left[k], r) / gap);
      }
    }
    v.dchi1 = dpr;
    v.dchi0 = (dh - v.ds * id) * v.chi1 + (h - v.s * id) * v.dchi1;

    const double hn = std::max(h.norm(), 1e-300);
    frame.max_chain_residual = std::max(
        {frame.max_chain_residual, (h * v.chi0 - v.s * v.chi0 - v.p * v.chi1).norm() / hn,
         (h * v.chi1 - v.s * v.chi1 - v.chi0).norm() / hn});
    frame.max_normalization_residual =
        std::max({frame.max_normalization_residual, std::abs(pair(v.tchi0, v.chi0)),
                  std::abs(pair(v.tchi1, v.chi1)), std::abs(pair(v.tchi1, v.chi0) - 1.0),
                  std::abs(pair(v.tchi0, v.chi1) - 1.0)});
    frame.samples.push_back(std::move(v));
  }
  return frame;
}

/// Same, with the reference taken from the EP left eigenvector so that the
/// frame tends to the EP chains for small loops.
inline VersalFrame versal_along_loop(const BranchTrack& track, const JordanData& jd) {
  VersalOptions opt;
  ComplexVector r = jd.tchi0.conjugate();
  opt.reference = r / r.norm();
  return versal_along_loop(track, opt);
}

/// Integrand <tchi0|dchi1> + <tchi1|dchi0> at one sample.
inline cplx versal_integrand(const VersalSample& v) {
  return pair(v.tchi0, v.dchi1) + pair(v.tchi1, v.dchi0);
}

/// i * integral over the frame's cycles of (<tchi0|dchi1> + <tchi1|dchi0>);
/// periodic trapezoid rule using every `stride`-th sample.
inline cplx versal_residual_integral(const VersalFrame& frame, std::size_t stride = 1) {
  const std::size_t total = frame.samples_per_cycle * frame.cycles;
  cplx sum{0.0};
  for (std::size_t k = 0; k < total; k += stride) sum += versal_integrand(frame.samples[k]);
  const double dt = static_cast<double>(stride) / static_cast<double>(frame.samples_per_cycle);
  return cplx(0.0, 1.0) * sum * dt;
}

/// Winding number of p(t) around 0 over the frame.
inline int p_winding(const VersalFrame& frame) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < frame.samples.size(); ++k)
    acc += std::arg(frame.samples[k + 1].p / frame.samples[k].p);
  return static_cast<int>(std::lround(acc / (2.0 * kPi)));
}

struct ChainsLimitReport {
  double max_radius = 0.0;        // max |X(t) - X_EP|
  double s_deviation = 0.0;       // max |s - E_EP|
  double chi0_deviation = 0.0;    // max ||chi0 / lambda - chi0_EP|| / ||chi0_EP||
  double chi1_deviation = 0.0;    // same for chi1, modulo multiples of chi0_EP
  bool expansion_regime = true;   // loop small enough for the EP expansion
  std::string note;
};

/// Compares a small-loop frame against the EP chains after removing the
/// per-sample scale lambda (and the chi1 -> chi1 + k chi0 freedom).
inline ChainsLimitReport chains_limit_check(const VersalFrame& frame, const JordanData& jd,
                                            double regime_radius = 1e-3) {
  ChainsLimitReport rep;
  const double n0 = jd.chi0.norm();
  for (const auto& v : frame.samples) {
    rep.max_radius = std::max(rep.max_radius, (v.point - jd.x_ep).norm());
    rep.s_deviation = std::max(rep.s_deviation, std::abs(v.s - jd.e_ep));
    const cplx lambda = jd.chi0.dot(v.chi0) / jd.chi0.squaredNorm();
    const ComplexVector c0 = v.chi0 / lambda;
    rep.chi0_deviation = std::max(rep.chi0_deviation, (c0 - jd.chi0).norm() / n0);
    ComplexVector d1 = v.chi1 / lambda - jd.chi1;
    d1 -= jd.chi0 * (jd.chi0.dot(d1) / jd.chi0.squaredNorm());
    rep.chi1_deviation = std::max(rep.chi1_deviation, d1.norm() / n0);
  }
  // sample points carry round-off, so a loop of radius exactly regime_radius qualifies
  if (rep.max_radius > regime_radius * (1.0 + 1e-9)) {
    rep.expansion_regime = false;
    rep.note = "expansion regime not reached";
  }
  return rep;
}

}  // namespace epberry
