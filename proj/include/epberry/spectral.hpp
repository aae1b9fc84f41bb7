#pragma once

// Biorthonormal eigenframes and continuous tracking of an eigenvalue pair
// along a parameter loop.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "epberry/hamiltonians.hpp"
#include "epberry/numerics.hpp"
#include "epberry/parallel.hpp"

namespace epberry {

/// Eigenvalue gap below which frames are considered ill-conditioned.
inline constexpr double kDegeneracyGap = 1e-6;

/// Eigenvalues with right vectors (unit norm, largest component real and
/// positive) and left vectors scaled so that <left_k|right_k> = 1.
struct Eigensystem {
  RealVector point;
  std::vector<cplx> values;
  std::vector<ComplexVector> right;
  std::vector<ComplexVector> left;

  std::size_t size() const { return values.size(); }

  double min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i)
      for (std::size_t j = i + 1; j < values.size(); ++j)
        g = std::min(g, std::abs(values[i] - values[j]));
    return g;
  }

  /// Spectral projector |right_k><left_k|.
  ComplexMatrix projector(std::size_t k) const { return outer(right[k], left[k]); }
};

namespace detail {

inline void canonical_phase(ComplexVector& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const cplx c = v(imax);
  if (std::abs(c) > 0.0) v *= std::conj(c) / std::abs(c);
  v /= v.norm();
}

inline Eigensystem build_eigensystem(const ComplexMatrix& h, const RealVector& x,
                                     double min_gap) {
  Eigensystem es;
  es.point = x;
  for (auto& tr : eig_general(h)) {
    es.values.push_back(tr.value);
    canonical_phase(tr.right);
    es.right.push_back(std::move(tr.right));
    es.left.push_back(std::move(tr.left));
  }
  if (min_gap > 0.0 && es.min_gap() < min_gap) {
    std::ostringstream msg;
    msg << "degenerate point: eigenvalue gap " << es.min_gap() << " below " << min_gap;
    fail(ErrorKind::DegeneratePoint, msg.str());
  }
  for (std::size_t k = 0; k < es.size(); ++k) {
    const cplx c = pair(es.left[k], es.right[k]);
    if (std::abs(c) == 0.0) {
      if (min_gap > 0.0)
        fail(ErrorKind::DegeneratePoint, "degenerate point: left and right eigenvectors orthogonal");
      continue;  // defective pair with the gap check disabled: left unnormalized
    }
    es.left[k] /= c;
  }
  return es;
}

}  // namespace detail

/// Biorthonormal frames of H(X). Fails with DegeneratePoint when two
/// eigenvalues are closer than min_gap; pass min_gap = 0 to skip the check
/// (frames of the coalescing pair are then meaningless).
inline Eigensystem eigensystem_at(const HamiltonianFamily& family, const RealVector& x,
                                  double min_gap = kDegeneracyGap) {
  return detail::build_eigensystem(family.evaluate(x), x, min_gap);
}

/// Tracked levels (n, n+1) chosen by sorted eigenvalue order at t = 0.
struct PairSelector {
  std::size_t lower = 0;
};

struct TrackOptions {
  /// Extra per-sample rescaling of the tracked right vectors (left vectors
  /// get the inverse). Used to probe gauge invariance.
  std::function<cplx(std::size_t sample, int branch)> gauge;
  /// Number of doublings allowed when matching is ambiguous (8N by default).
  int max_doublings = 3;
};

struct TrackSample {
  double t = 0.0;
  Eigensystem system;
  std::array<std::size_t, 2> level{};  // level index of each tracked branch
};

/// Permutation of the tracked pair after a whole number of cycles:
/// perm[b] is the branch whose starting level branch b now occupies.
using Monodromy = std::array<int, 2>;

inline bool is_identity(const Monodromy& m) { return m[0] == 0 && m[1] == 1; }
inline bool is_swap(const Monodromy& m) { return m[0] == 1 && m[1] == 0; }

class BranchTrack {
 public:
  BranchTrack(HamiltonianFamily family, ParameterLoop loop, PairSelector pair, std::size_t cycles,
              std::vector<TrackSample> samples, std::vector<Monodromy> monodromy)
      : family_(std::move(family)),
        loop_(std::move(loop)),
        pair_(pair),
        cycles_(cycles),
        samples_(std::move(samples)),
        monodromy_(std::move(monodromy)) {}

  const HamiltonianFamily& family() const { return family_; }
  const ParameterLoop& loop() const { return loop_; }
  PairSelector pair_selector() const { return pair_; }
  std::size_t cycles() const { return cycles_; }
  std::size_t samples_per_cycle() const { return loop_.samples; }
  /// cycles * N + 1 samples; the last one sits at the same point as the first.
  const std::vector<TrackSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

  cplx value(std::size_t i, int b) const {
    const auto& s = samples_[i];
    return s.system.values[s.level[static_cast<std::size_t>(b)]];
  }
  const ComplexVector& right(std::size_t i, int b) const {
    const auto& s = samples_[i];
    return s.system.right[s.level[static_cast<std::size_t>(b)]];
  }
  const ComplexVector& left(std::size_t i, int b) const {
    const auto& s = samples_[i];
    return s.system.left[s.level[static_cast<std::size_t>(b)]];
  }

  /// Monodromy after cycle c (1-based); monodromy(cycles()) is the total.
  const Monodromy& monodromy(std::size_t c) const { return monodromy_.at(c - 1); }
  const Monodromy& total_monodromy() const { return monodromy_.back(); }

  /// max over steps and branches of |<left_i|right_{i+1}> - 1|.
  double max_overlap_defect() const {
    double d = 0.0;
    for (std::size_t i = 0; i + 1 < samples_.size(); ++i)
      for (int b = 0; b < 2; ++b) d = std::max(d, std::abs(pair(left(i, b), right(i + 1, b)) - 1.0));
    return d;
  }

 private:
  HamiltonianFamily family_;
  ParameterLoop loop_;
  PairSelector pair_;
  std::size_t cycles_;
  std::vector<TrackSample> samples_;
  std::vector<Monodromy> monodromy_;
};

namespace detail {

struct MatchOutcome {
  bool ok = true;
  std::string reason;
};

/// Picks the level at sample i+1 continuing branch level `from` of sample i.
/// Primary criterion is the gauge-invariant overlap |<l|r'><l'|r>|, the
/// cross-check is the smallest eigenvalue jump.
inline MatchOutcome match_level(const Eigensystem& cur, std::size_t from, const Eigensystem& next,
                                std::size_t& to) {
  const ComplexVector& r = cur.right[from];
  const ComplexVector& l = cur.left[from];
  const cplx e = cur.values[from];
  std::size_t by_overlap = 0, by_energy = 0;
  double best_ov = -1.0, second_ov = -1.0, best_de = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double ov = std::abs(pair(l, next.right[k]) * pair(next.left[k], r));
    if (ov > best_ov) {
      second_ov = best_ov;
      best_ov = ov;
      by_overlap = k;
    } else if (ov > second_ov) {
      second_ov = ov;
    }
    const double de = std::abs(next.values[k] - e);
    if (de < best_de) {
      best_de = de;
      by_energy = k;
    }
  }
  to = by_overlap;
  if (by_overlap != by_energy) return {false, "overlap and energy matching disagree"};
  if (best_ov < 0.5 || second_ov > 0.5 * best_ov) return {false, "weak overlap"};
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cur.size(); ++k)
    if (k != from) sep = std::min(sep, std::abs(cur.values[k] - e));
  if (best_de >= sep) return {false, "eigenvalue step exceeds branch separation"};
  return {};
}

/// Rescales `v` by a unit complex number so that v_prev^H v is real positive.
inline cplx align_phase(const ComplexVector& prev, const ComplexVector& v) {
  const cplx ph = prev.dot(v);  // conjugates prev
  if (std::abs(ph) == 0.0) return 1.0;
  return std::conj(ph) / std::abs(ph);
}

inline std::vector<Eigensystem> sample_systems(const HamiltonianFamily& family,
                                               const ParameterLoop& loop, std::size_t total) {
  std::vector<Eigensystem> out(total + 1);
  const double n = static_cast<double>(loop.samples);
  parallel_for(total + 1, [&](std::size_t i) {
    const double t = static_cast<double>(i) / n;
    out[i] = eigensystem_at(family, loop.point(t));
  });
  return out;
}

inline std::optional<BranchTrack> try_track(const HamiltonianFamily& family,
                                            const ParameterLoop& loop, PairSelector sel,
                                            std::size_t cycles, const TrackOptions& opt,
                                            std::string& why) {
  const std::size_t n = loop.samples;
  const std::size_t total = cycles * n;
  std::vector<Eigensystem> sys;
  try {
    sys = sample_systems(family, loop, total);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DegeneratePoint)
      fail(ErrorKind::DegeneratePoint, std::string("gap collapse on loop: ") + e.what());
    throw;
  }
  if (sel.lower + 1 >= sys[0].size())
    fail(ErrorKind::InvalidArgument, "pair selector out of range for dimension " +
                                         std::to_string(sys[0].size()));

  std::vector<TrackSample> samples(total + 1);
  std::array<std::size_t, 2> lv{sel.lower, sel.lower + 1};
  for (std::size_t i = 0; i <= total; ++i) {
    samples[i].t = static_cast<double>(i) / static_cast<double>(n);
    samples[i].system = std::move(sys[i]);
    if (i > 0) {
      std::array<std::size_t, 2> next{};
      for (int b = 0; b < 2; ++b) {
        const auto r = match_level(samples[i - 1].system, lv[static_cast<std::size_t>(b)],
                                   samples[i].system, next[static_cast<std::size_t>(b)]);
        if (!r.ok) {
          why = r.reason + " at t = " + std::to_string(samples[i].t);
          return std::nullopt;
        }
      }
      if (next[0] == next[1]) {
        why = "both branches matched the same level at t = " + std::to_string(samples[i].t);
        return std::nullopt;
      }
      lv = next;
      // continuity gauge: unit norm, phase aligned with the previous sample
      for (int b = 0; b < 2; ++b) {
        const std::size_t k = lv[static_cast<std::size_t>(b)];
        auto& es = samples[i].system;
        const cplx c = align_phase(samples[i - 1].system.right[samples[i - 1].level[static_cast<std::size_t>(b)]],
                                   es.right[k]);
        es.right[k] *= c;
        es.left[k] /= c;
      }
    }
    samples[i].level = lv;
  }

  if (opt.gauge) {
    for (std::size_t i = 0; i <= total; ++i)
      for (int b = 0; b < 2; ++b) {
        const cplx g = opt.gauge(i, b);
        auto& es = samples[i].system;
        const std::size_t k = samples[i].level[static_cast<std::size_t>(b)];
        es.right[k] *= g;
        es.left[k] /= g;
      }
  }

  std::vector<Monodromy> mono;
  for (std::size_t c = 1; c <= cycles; ++c) {
    const auto& end = samples[c * n].level;
    Monodromy m{-1, -1};
    for (int b = 0; b < 2; ++b)
      for (int b0 = 0; b0 < 2; ++b0)
        if (end[static_cast<std::size_t>(b)] == samples[0].level[static_cast<std::size_t>(b0)])
          m[static_cast<std::size_t>(b)] = b0;
    if (m[0] < 0 || m[1] < 0)
      fail(ErrorKind::TrackingFailure,
           "tracked pair exchanged with a spectator level; the loop encloses another degeneracy");
    mono.push_back(m);
  }
  return BranchTrack(family, loop, sel, cycles, std::move(samples), std::move(mono));
}

}  // namespace detail

/// Tracks levels (n, n+1) continuously over `cycles` turns of the loop.
///
/// Raw eigendecompositions are computed per sample (in parallel), then
/// matched sequentially. An ambiguous match doubles the sample count, up to
/// opt.max_doublings times.
inline BranchTrack track_pair(const HamiltonianFamily& family, const ParameterLoop& loop,
                              PairSelector sel, std::size_t cycles,
                              const TrackOptions& opt = {}) {
  if (cycles < 1 || cycles > 2) fail(ErrorKind::InvalidArgument, "track_pair: cycles must be 1 or 2");
  if (family.param_count() != loop.shape.dim)
    fail(ErrorKind::InvalidArgument, "track_pair: loop dimension does not match family parameters");
  ParameterLoop current = loop;
  std::string why;
  for (int d = 0; d <= opt.max_doublings; ++d) {
    if (auto t = detail::try_track(family, current, sel, cycles, opt, why)) return std::move(*t);
    current = current.with_samples(current.samples * 2);
  }
  fail(ErrorKind::TrackingFailure, "matching ambiguous after refinement to " +
                                       std::to_string(current.samples / 2) + " samples: " + why);
}

inline constexpr std::size_t kMaxTrackSamples = std::size_t{1} << 18;

/// Doubles the sample count until every consecutive-sample overlap satisfies
/// |<left_i|right_{i+1}> - 1| < target.
inline BranchTrack adaptive_refine(const BranchTrack& track, double target = 0.1,
                                   const TrackOptions& opt = {}) {
  double defect = track.max_overlap_defect();
  if (defect < target) return track;
  ParameterLoop loop = track.loop();
  while (loop.samples * 2 <= kMaxTrackSamples) {
    loop = loop.with_samples(loop.samples * 2);
    BranchTrack t = track_pair(track.family(), loop, track.pair_selector(), track.cycles(), opt);
    defect = t.max_overlap_defect();
    if (defect < target) return t;
    loop = t.loop();
  }
  std::ostringstream msg;
  msg << "adaptive_refine: sample cap " << kMaxTrackSamples << " reached with overlap defect "
      << defect;
  fail(ErrorKind::NonConvergence, msg.str());
}

}  // namespace epberry
