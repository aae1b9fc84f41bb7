#pragma once

// Run configuration and the command pipelines behind the ep-berry tool. Each
// command returns a JSON document (with the resolved config under "config")
// and optionally CSV text; the executable only handles argv and files.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "epberry/asymptotics.hpp"
#include "epberry/eppoint.hpp"
#include "epberry/hamiltonians.hpp"
#include "epberry/json_io.hpp"
#include "epberry/phase.hpp"
#include "epberry/spectral.hpp"
#include "epberry/versal.hpp"

namespace epberry::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> c{"locate-ep", "chains", "phase", "sweep", "levels",
                                          "monodromy"};
  return c;
}

struct FamilyConfig {
  std::string builtin;  // one of builtin_names(), or empty when file is set
  std::string file;
  std::optional<cplx> delta, delta2;
  double coupling = 1.0;
  std::uint64_t seed = 7;
};

struct LoopConfig {
  std::optional<RealVector> center;  // defaults to the EP
  std::pair<std::size_t, std::size_t> plane{0, 1};
  std::string shape = "circle";  // circle | ellipse | star | points
  double ratio = 3.0;            // ellipse
  int lobes = 5;                 // star
  double depth = 0.3;            // star
  std::vector<RealVector> points;
  double epsilon = 0.1;
  std::size_t samples = 1024;
  bool reverse = false;
};

struct RunConfig {
  FamilyConfig family;
  LoopConfig loop;
  std::optional<std::size_t> pair;  // lower level index at loop start
  std::optional<RealVector> ep_guess;
  std::optional<RealVector> ep_x;   // known EP: skips Newton
  std::optional<cplx> ep_energy;
  LocateOptions locate;
  std::string method = "all";  // double | winding | versal | all
  bool decomposition = true;
  double period = 1.0;
  double hbar = 1.0;
  std::vector<double> eps;
  std::size_t contour_samples = 256;
  std::vector<double> deltas;
  std::string out;
  std::string csv;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

[[noreturn]] inline void bad(const std::string& field, const std::string& why) {
  fail(ErrorKind::ParseError, "config: field '" + field + "' " + why);
}

inline double num(const Json& j, const std::string& f) {
  if (!j.is_number()) bad(f, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(f, "must be finite");
  return v;
}

inline double positive(const Json& j, const std::string& f) {
  const double v = num(j, f);
  if (!(v > 0.0)) bad(f, "must be positive");
  return v;
}

inline std::size_t count(const Json& j, const std::string& f, std::size_t min = 0) {
  if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min))
    bad(f, "must be an integer >= " + std::to_string(min));
  return static_cast<std::size_t>(j.get<long long>());
}

inline cplx complex_value(const Json& j, const std::string& f) {
  if (j.is_number()) return {num(j, f), 0.0};
  if (!j.is_array() || j.size() != 2) bad(f, "must be a number or [re, im]");
  return {num(j[0], f + "[0]"), num(j[1], f + "[1]")};
}

inline RealVector real_vector(const Json& j, const std::string& f) {
  if (!j.is_array() || j.empty()) bad(f, "must be a non-empty array of numbers");
  RealVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = num(j[i], f + "[" + std::to_string(i) + "]");
  return v;
}

inline std::vector<double> positive_list(const Json& j, const std::string& f) {
  if (!j.is_array()) bad(f, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(positive(j[i], f + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string text(const Json& j, const std::string& f) {
  if (!j.is_string()) bad(f, "must be a string");
  return j.get<std::string>();
}

inline bool boolean(const Json& j, const std::string& f) {
  if (!j.is_boolean()) bad(f, "must be true or false");
  return j.get<bool>();
}

inline void only_keys(const Json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) bad(where, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      bad(where.empty() ? it.key() : where + "." + it.key(), "is not recognized");
}

}  // namespace detail

inline RunConfig parse_config(const Json& doc) {
  using namespace detail;
  RunConfig c;
  if (!doc.is_object()) fail(ErrorKind::ParseError, "config: top level must be an object");
  only_keys(doc, "", {"family", "loop", "pair", "ep", "locate", "phase", "sweep", "levels", "output"});

  if (!doc.contains("family")) bad("family", "is required");
  const Json& fj = doc["family"];
  only_keys(fj, "family", {"builtin", "file", "delta", "delta2", "coupling", "seed"});
  if (fj.contains("builtin")) c.family.builtin = text(fj["builtin"], "family.builtin");
  if (fj.contains("file")) c.family.file = text(fj["file"], "family.file");
  if (c.family.builtin.empty() == c.family.file.empty())
    bad("family", "needs exactly one of 'builtin' or 'file'");
  if (!c.family.builtin.empty()) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), c.family.builtin) == names.end())
      bad("family.builtin", "names an unknown family '" + c.family.builtin + "'");
  }
  if (fj.contains("delta")) c.family.delta = complex_value(fj["delta"], "family.delta");
  if (fj.contains("delta2")) c.family.delta2 = complex_value(fj["delta2"], "family.delta2");
  if (fj.contains("coupling")) c.family.coupling = positive(fj["coupling"], "family.coupling");
  if (fj.contains("seed")) c.family.seed = count(fj["seed"], "family.seed");

  if (doc.contains("loop")) {
    const Json& lj = doc["loop"];
    only_keys(lj, "loop", {"center", "plane", "shape", "ratio", "lobes", "depth", "points",
                           "epsilon", "samples", "reverse"});
    if (lj.contains("center")) c.loop.center = real_vector(lj["center"], "loop.center");
    if (lj.contains("plane")) {
      const Json& p = lj["plane"];
      if (!p.is_array() || p.size() != 2) bad("loop.plane", "must be [j1, j2]");
      c.loop.plane = {count(p[0], "loop.plane[0]"), count(p[1], "loop.plane[1]")};
    }
    if (lj.contains("shape")) {
      c.loop.shape = text(lj["shape"], "loop.shape");
      if (c.loop.shape != "circle" && c.loop.shape != "ellipse" && c.loop.shape != "star" &&
          c.loop.shape != "points")
        bad("loop.shape", "must be circle, ellipse, star or points");
    }
    if (lj.contains("ratio")) c.loop.ratio = positive(lj["ratio"], "loop.ratio");
    if (lj.contains("lobes")) c.loop.lobes = static_cast<int>(count(lj["lobes"], "loop.lobes", 1));
    if (lj.contains("depth")) c.loop.depth = num(lj["depth"], "loop.depth");
    if (lj.contains("points")) {
      const Json& p = lj["points"];
      if (!p.is_array()) bad("loop.points", "must be an array of points");
      for (std::size_t i = 0; i < p.size(); ++i)
        c.loop.points.push_back(real_vector(p[i], "loop.points[" + std::to_string(i) + "]"));
    }
    if (lj.contains("epsilon")) c.loop.epsilon = positive(lj["epsilon"], "loop.epsilon");
    if (lj.contains("samples")) c.loop.samples = count(lj["samples"], "loop.samples", 16);
    if (lj.contains("reverse")) c.loop.reverse = boolean(lj["reverse"], "loop.reverse");
  }
  if (doc.contains("pair") && !doc["pair"].is_null()) c.pair = count(doc["pair"], "pair");

  if (doc.contains("ep")) {
    const Json& ej = doc["ep"];
    only_keys(ej, "ep", {"guess", "x", "energy"});
    if (ej.contains("guess")) c.ep_guess = real_vector(ej["guess"], "ep.guess");
    if (ej.contains("x")) c.ep_x = real_vector(ej["x"], "ep.x");
    if (ej.contains("energy")) c.ep_energy = complex_value(ej["energy"], "ep.energy");
  }
  if (doc.contains("locate")) {
    const Json& lj = doc["locate"];
    only_keys(lj, "locate", {"max_iterations", "relative_step", "p_tolerance", "gap_tolerance"});
    if (lj.contains("max_iterations"))
      c.locate.max_iterations = static_cast<int>(count(lj["max_iterations"], "locate.max_iterations", 1));
    if (lj.contains("relative_step"))
      c.locate.relative_step = positive(lj["relative_step"], "locate.relative_step");
    if (lj.contains("p_tolerance")) c.locate.p_tolerance = positive(lj["p_tolerance"], "locate.p_tolerance");
    if (lj.contains("gap_tolerance"))
      c.locate.gap_tolerance = positive(lj["gap_tolerance"], "locate.gap_tolerance");
  }
  if (doc.contains("phase")) {
    const Json& pj = doc["phase"];
    only_keys(pj, "phase", {"method", "decomposition", "period", "hbar"});
    if (pj.contains("method")) c.method = text(pj["method"], "phase.method");
    if (pj.contains("decomposition")) c.decomposition = boolean(pj["decomposition"], "phase.decomposition");
    if (pj.contains("period")) c.period = positive(pj["period"], "phase.period");
    if (pj.contains("hbar")) c.hbar = positive(pj["hbar"], "phase.hbar");
  }
  if (doc.contains("sweep")) {
    const Json& sj = doc["sweep"];
    only_keys(sj, "sweep", {"eps"});
    if (sj.contains("eps")) c.eps = positive_list(sj["eps"], "sweep.eps");
  }
  if (doc.contains("levels")) {
    const Json& vj = doc["levels"];
    only_keys(vj, "levels", {"contour_samples", "deltas"});
    if (vj.contains("contour_samples"))
      c.contour_samples = count(vj["contour_samples"], "levels.contour_samples", 4);
    if (vj.contains("deltas")) c.deltas = positive_list(vj["deltas"], "levels.deltas");
  }
  if (doc.contains("output")) {
    const Json& oj = doc["output"];
    only_keys(oj, "output", {"out", "csv"});
    if (oj.contains("out")) c.out = text(oj["out"], "output.out");
    if (oj.contains("csv")) c.csv = text(oj["csv"], "output.csv");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "config: cannot open '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, "config: malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

/// Flag overrides; flags win over the file.
struct Overrides {
  std::optional<std::string> method;
  std::optional<std::vector<double>> eps;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

inline void apply(RunConfig& c, const Overrides& o) {
  if (o.method) c.method = *o.method;
  if (o.eps) {
    for (double e : *o.eps)
      if (!(e > 0.0) || !std::isfinite(e)) fail(ErrorKind::InvalidArgument, "--eps values must be positive");
    c.eps = *o.eps;
  }
  if (o.out) c.out = *o.out;
  if (o.seed) c.family.seed = *o.seed;
}

// ---------------------------------------------------------------------------
// Resolution

struct Context {
  RunConfig config;
  HamiltonianFamily family;
  std::optional<LocateResult> located;
  RealVector x_ep;
  cplx e_ep;
  bool have_ep = false;
};

inline HamiltonianFamily make_family(const FamilyConfig& f) {
  if (!f.file.empty()) return load_family(f.file);
  BuiltinOptions o;
  o.delta = f.delta;
  o.delta2 = f.delta2;
  o.coupling = f.coupling;
  o.seed = f.seed;
  return builtin(f.builtin, o);
}

inline LoopShape make_shape(const LoopConfig& l, std::size_t m) {
  LoopShape s;
  if (l.shape == "circle") s = circle_shape(m, l.plane.first, l.plane.second);
  else if (l.shape == "ellipse") s = ellipse_shape(l.ratio, m, l.plane.first, l.plane.second);
  else if (l.shape == "star") s = star_shape(l.lobes, l.depth, m, l.plane.first, l.plane.second);
  else {
    if (l.points.empty()) fail(ErrorKind::InvalidArgument, "config: loop.shape 'points' needs loop.points");
    s = points_shape(l.points);
    if (s.dim != m) fail(ErrorKind::InvalidArgument, "config: loop.points have the wrong dimension");
  }
  return l.reverse ? reversed(s) : s;
}

/// Builds the family and, if `need_ep`, the exceptional point (given or
/// located by Newton from ep.guess, the builtin EP, or the loop center).
inline Context resolve(const RunConfig& cfg, bool need_ep) {
  Context ctx{cfg, make_family(cfg.family), std::nullopt, RealVector(), cplx{0.0}, false};
  const std::size_t m = ctx.family.param_count();
  auto check_dim = [&](const std::optional<RealVector>& v, const char* f) {
    if (v && static_cast<std::size_t>(v->size()) != m)
      fail(ErrorKind::InvalidArgument, std::string("config: field '") + f + "' must have " +
                                           std::to_string(m) + " components");
  };
  check_dim(cfg.loop.center, "loop.center");
  check_dim(cfg.ep_guess, "ep.guess");
  check_dim(cfg.ep_x, "ep.x");
  if (!need_ep) return ctx;

  RealVector guess;
  if (cfg.ep_x) {
    ctx.x_ep = *cfg.ep_x;
    ctx.e_ep = cfg.ep_energy ? *cfg.ep_energy
                             : epberry::detail::closest_pair_center(ctx.family.evaluate(ctx.x_ep));
  } else {
    if (cfg.ep_guess) guess = *cfg.ep_guess;
    else if (!cfg.family.builtin.empty()) guess = builtin_ep(cfg.family.builtin);
    else if (cfg.loop.center) guess = *cfg.loop.center;
    else fail(ErrorKind::InvalidArgument, "config: need ep.guess, ep.x or loop.center to find the EP");
    LocateOptions lo = cfg.locate;
    lo.plane = cfg.loop.plane;
    const cplx near = cfg.ep_energy
                          ? *cfg.ep_energy
                          : (cfg.pair ? 0.5 * (eigenvalues(ctx.family.evaluate(guess)).at(*cfg.pair) +
                                               eigenvalues(ctx.family.evaluate(guess)).at(*cfg.pair + 1))
                                      : epberry::detail::closest_pair_center(ctx.family.evaluate(guess)));
    ctx.located = locate_ep(ctx.family, guess, near, lo);
    ctx.x_ep = ctx.located->x_ep;
    ctx.e_ep = ctx.located->e_ep;
  }
  ctx.have_ep = true;
  if (!ctx.config.loop.center) ctx.config.loop.center = ctx.x_ep;
  return ctx;
}

inline ParameterLoop make_loop(const Context& ctx) {
  const auto& l = ctx.config.loop;
  if (!l.center) fail(ErrorKind::InvalidArgument, "config: loop.center is required");
  return ParameterLoop(*l.center, make_shape(l, ctx.family.param_count()), l.epsilon, l.samples);
}

inline PairSelector make_pair(const Context& ctx, const ParameterLoop& loop) {
  if (ctx.config.pair) return {*ctx.config.pair};
  if (!ctx.have_ep) fail(ErrorKind::InvalidArgument, "config: 'pair' is required");
  return pair_near(ctx.family, loop.point(0.0), ctx.e_ep);
}

inline JordanData chains_at_ep(const Context& ctx) {
  return jordan_chains(ctx.family, ctx.x_ep, ctx.e_ep);
}

/// Resolved configuration, every default explicit.
inline Json config_json(const RunConfig& c) {
  Json f;
  if (!c.family.builtin.empty()) {
    f["builtin"] = c.family.builtin;
    if (c.family.builtin == "sym3" || c.family.builtin == "gen3" || c.family.builtin == "gen4")
      f["delta"] = to_json(c.family.delta.value_or(kDefaultDelta));
    if (c.family.builtin == "gen4") f["delta2"] = to_json(c.family.delta2.value_or(kDefaultDelta2));
    f["coupling"] = c.family.coupling;
    f["seed"] = c.family.seed;
  } else {
    f["file"] = c.family.file;
  }
  Json l;
  l["center"] = c.loop.center ? to_json(*c.loop.center) : Json(nullptr);
  l["plane"] = Json::array({c.loop.plane.first, c.loop.plane.second});
  l["shape"] = c.loop.shape;
  if (c.loop.shape == "ellipse") l["ratio"] = c.loop.ratio;
  if (c.loop.shape == "star") {
    l["lobes"] = c.loop.lobes;
    l["depth"] = c.loop.depth;
  }
  if (c.loop.shape == "points") {
    Json p = Json::array();
    for (const auto& v : c.loop.points) p.push_back(to_json(v));
    l["points"] = p;
  }
  l["epsilon"] = c.loop.epsilon;
  l["samples"] = c.loop.samples;
  l["reverse"] = c.loop.reverse;
  Json e;
  e["guess"] = c.ep_guess ? to_json(*c.ep_guess) : Json(nullptr);
  e["x"] = c.ep_x ? to_json(*c.ep_x) : Json(nullptr);
  e["energy"] = c.ep_energy ? to_json(*c.ep_energy) : Json(nullptr);
  Json j;
  j["family"] = f;
  j["loop"] = l;
  j["pair"] = c.pair ? Json(*c.pair) : Json(nullptr);
  j["ep"] = e;
  j["locate"] = {{"max_iterations", c.locate.max_iterations},
                 {"relative_step", c.locate.relative_step},
                 {"p_tolerance", c.locate.p_tolerance},
                 {"gap_tolerance", c.locate.gap_tolerance}};
  j["phase"] = {{"method", c.method}, {"decomposition", c.decomposition},
                {"period", c.period}, {"hbar", c.hbar}};
  Json eps = Json::array();
  for (double x : c.eps) eps.push_back(x);
  j["sweep"] = {{"eps", eps}};
  Json del = Json::array();
  for (double x : c.deltas) del.push_back(x);
  j["levels"] = {{"contour_samples", c.contour_samples}, {"deltas", del}};
  j["output"] = {{"out", c.out}, {"csv", c.csv}};
  return j;
}

// ---------------------------------------------------------------------------
// Commands

struct Output {
  Json json;
  std::string csv;  // written to config.csv when non-empty
};

inline Json jordan_json(const JordanData& jd) {
  const auto& r = jd.residuals;
  return {{"x_ep", to_json(jd.x_ep)},
          {"e_ep", to_json(jd.e_ep)},
          {"chi0", to_json(jd.chi0)},
          {"chi1", to_json(jd.chi1)},
          {"tchi0", to_json(jd.tchi0)},
          {"tchi1", to_json(jd.tchi1)},
          {"mu_grad", to_json(jd.mu_grad)},
          {"residuals",
           {{"sigma_min", r.sigma_min},
            {"sigma_second", r.sigma_second},
            {"right_eigen", r.right_eigen},
            {"right_chain", r.right_chain},
            {"left_eigen", r.left_eigen},
            {"left_chain", r.left_chain},
            {"orthogonality", r.orthogonality},
            {"norm_10", r.norm_10},
            {"norm_01", r.norm_01},
            {"norm_11", r.norm_11}}}};
}

inline Output cmd_locate_ep(const RunConfig& cfg) {
  Context ctx = resolve(cfg, true);
  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["x_ep"] = to_json(ctx.x_ep);
  o.json["e_ep"] = to_json(ctx.e_ep);
  const ComplexMatrix h = ctx.family.evaluate(ctx.x_ep);
  const auto ps = epberry::detail::pair_scalars(h, ctx.e_ep);
  Json res = {{"abs_p", std::abs(ps.p)}, {"gap", ps.gap}};
  if (ctx.located) {
    res["iterations"] = ctx.located->iterations;
    Json hist = Json::array();
    for (std::size_t i = 0; i < ctx.located->history.size(); ++i)
      hist.push_back({{"x", to_json(ctx.located->history[i])}, {"abs_p", ctx.located->p_history[i]}});
    res["history"] = hist;
  }
  o.json["residuals"] = res;
  return o;
}

inline Output cmd_chains(const RunConfig& cfg) {
  Context ctx = resolve(cfg, true);
  const JordanData jd = chains_at_ep(ctx);
  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["chains"] = jordan_json(jd);
  o.json["symmetric"] = ctx.family.is_symmetric();
  Json tangent = Json::array();
  const RealMatrix t = ep_tangent(jd);
  for (Eigen::Index c = 0; c < t.cols(); ++c) tangent.push_back(to_json(RealVector(t.col(c))));
  o.json["ep_tangent"] = tangent;
  return o;
}

inline Json phase_json(const PhaseResult& r) {
  Json j = {{"method", to_string(r.method)},
            {"gamma", to_json(r.gamma)},
            {"error_estimate", r.discretization_error},
            {"samples", r.samples}};
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    j["decomposition"] = Json::array({to_json(d.i1), to_json(d.i2), to_json(d.i3)});
  }
  return j;
}

inline std::string versal_csv(const VersalFrame& f) {
  std::string s = "t,re_s,im_s,re_p,im_p,re_sqrt_p,im_sqrt_p\n";
  for (const auto& v : f.samples)
    s += csv_row({v.t, v.s.real(), v.s.imag(), v.p.real(), v.p.imag(), v.sqrt_p.real(),
                  v.sqrt_p.imag()}) +
         "\n";
  return s;
}

inline Output cmd_phase(const RunConfig& cfg) {
  const std::string& m = cfg.method;
  if (m != "double" && m != "winding" && m != "versal" && m != "all")
    fail(ErrorKind::InvalidArgument, "--method must be double, winding, versal or all");
  const bool want_versal = m == "versal" || m == "all";
  Context ctx = resolve(cfg, cfg.pair == std::nullopt || want_versal);
  if (m == "winding" && !ctx.family.is_symmetric())
    fail(ErrorKind::InvalidArgument, "winding method is for symmetric families only");
  const ParameterLoop loop = make_loop(ctx);
  const PairSelector sel = make_pair(ctx, loop);
  const BranchTrack one = track_pair(ctx.family, loop, sel, 1);
  const bool swaps = is_swap(one.total_monodromy());

  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["pair"] = Json::array({sel.lower, sel.lower + 1});
  o.json["encircles_ep"] = swaps;
  Json results = Json::array();
  PhaseOptions po;
  po.cycles = swaps ? 2 : 1;
  if (m == "double" || m == "all") results.push_back(phase_json(phase_double_cycle(ctx.family, loop, sel, po)));
  if ((m == "winding") || (m == "all" && ctx.family.is_symmetric()))
    results.push_back(phase_json(phase_winding_symmetric(ctx.family, loop, sel)));
  if (want_versal) {
    if (!swaps) {
      if (m == "versal")
        fail(ErrorKind::InvalidArgument, "versal method needs a loop encircling the EP once");
      o.json["versal_note"] = "skipped: loop does not encircle the EP";
    } else {
      const JordanData jd = chains_at_ep(ctx);
      PhaseOptions pv;
      pv.decomposition = cfg.decomposition;
      results.push_back(phase_json(phase_versal(ctx.family, loop, jd, sel, pv)));
      if (!cfg.csv.empty()) {
        const BranchTrack t = adaptive_refine(one, pv.overlap_target);
        o.csv = versal_csv(versal_along_loop(t, jd));
      }
    }
  }
  o.json["results"] = results;
  const BranchTrack full = track_pair(ctx.family, loop, sel, swaps ? 2 : 1);
  o.json["dynamical_phase"] = to_json(dynamical_phase(full, cfg.period, cfg.hbar));
  return o;
}

inline Json level_list_json(const std::vector<LevelContribution>& v) {
  Json a = Json::array();
  for (const auto& l : v)
    a.push_back({{"level", l.level}, {"energy", to_json(l.energy)}, {"contribution", to_json(l.contribution)}});
  return a;
}

inline Output cmd_sweep(const RunConfig& cfg) {
  if (cfg.eps.empty()) fail(ErrorKind::InvalidArgument, "sweep: empty epsilon list (set sweep.eps or --eps)");
  Context ctx = resolve(cfg, true);
  const JordanData jd = chains_at_ep(ctx);
  const LoopShape shape = make_shape(ctx.config.loop, ctx.family.param_count());
  const auto direct = correction_direct(ctx.family, jd, shape, cfg.contour_samples);
  const auto spectral = correction_spectral(ctx.family, jd, shape, cfg.contour_samples);
  const auto sweep = epsilon_sweep(ctx.family, jd, shape, cfg.eps, cfg.loop.samples);

  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["a_direct"] = to_json(direct.value);
  o.json["a_direct_error"] = direct.error_estimate;
  o.json["a_spectral"] = to_json(spectral.value);
  o.json["per_level"] = level_list_json(spectral.per_level);
  Json sw = Json::array();
  o.csv = "epsilon,re_gamma,im_gamma,re_gamma_minus_pi,im_gamma_minus_pi,error_estimate\n";
  for (const auto& e : sweep.entries) {
    sw.push_back({{"epsilon", e.epsilon}, {"gamma", to_json(e.gamma)},
                  {"gamma_minus_pi", to_json(e.deviation)}, {"error_estimate", e.error_estimate}});
    o.csv += csv_row({e.epsilon, e.gamma.real(), e.gamma.imag(), e.deviation.real(),
                      e.deviation.imag(), e.error_estimate}) +
             "\n";
  }
  o.json["sweep"] = sw;
  o.json["resolved"] = sweep.resolved;
  o.json["fitted_exponent"] = sweep.fitted_exponent;
  o.json["fitted_coefficient"] = to_json(sweep.fitted_coefficient);
  if (!sweep.note.empty()) o.json["note"] = sweep.note;
  return o;
}

inline Output cmd_levels(const RunConfig& cfg) {
  Context ctx = resolve(cfg, true);
  const JordanData jd = chains_at_ep(ctx);
  const LoopShape shape = make_shape(ctx.config.loop, ctx.family.param_count());
  const auto spec = spectators(ctx.family, jd);
  const auto direct = correction_direct(ctx.family, jd, shape, cfg.contour_samples);
  const auto spectral = correction_spectral(ctx.family, jd, shape, cfg.contour_samples);
  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["a_direct"] = to_json(direct.value);
  o.json["a_spectral"] = to_json(spectral.value);
  o.json["per_level"] = level_list_json(spectral.per_level);
  o.json["identity_resolution_residual"] = identity_resolution_residual(jd, spec);
  o.json["jordan_reconstruction_residual"] = jordan_reconstruction_residual(ctx.family, jd, spec);
  if (!cfg.deltas.empty()) {
    if (cfg.family.builtin != "gen3")
      fail(ErrorKind::InvalidArgument, "levels.deltas: the delta scan is defined for the gen3 builtin");
    auto make = [&](double d) {
      BuiltinOptions bo;
      bo.delta = cplx(d, 0.0);
      bo.delta2 = cfg.family.delta2;
      bo.coupling = cfg.family.coupling;
      bo.seed = cfg.family.seed;
      return builtin("gen3", bo);
    };
    const auto rep = divergence_scan(make, ctx.x_ep, ctx.e_ep, cfg.deltas, shape, cfg.contour_samples);
    Json scan = Json::array();
    o.csv = "delta,re_a,im_a,abs_a\n";
    for (const auto& e : rep.entries) {
      scan.push_back({{"delta", e.delta}, {"a", to_json(e.a)}});
      o.csv += csv_row({e.delta, e.a.real(), e.a.imag(), std::abs(e.a)}) + "\n";
    }
    o.json["delta_scan"] = {{"entries", scan}, {"slope", rep.slope}, {"truncated", rep.truncated},
                            {"note", rep.note}};
  }
  return o;
}

inline Output cmd_monodromy(const RunConfig& cfg) {
  Context ctx = resolve(cfg, !cfg.pair.has_value());
  const ParameterLoop loop = make_loop(ctx);
  const PairSelector sel = make_pair(ctx, loop);
  const BranchTrack t = track_pair(ctx.family, loop, sel, 2);
  Output o;
  o.json["config"] = config_json(ctx.config);
  o.json["pair"] = Json::array({sel.lower, sel.lower + 1});
  const auto& m1 = t.monodromy(1);
  const auto& m2 = t.monodromy(2);
  o.json["one_cycle"] = Json::array({m1[0], m1[1]});
  o.json["two_cycles"] = Json::array({m2[0], m2[1]});
  o.json["swap"] = is_swap(m1);
  o.json["samples"] = t.samples_per_cycle();
  return o;
}

inline Output run(const std::string& command, const RunConfig& cfg) {
  if (command == "locate-ep") return cmd_locate_ep(cfg);
  if (command == "chains") return cmd_chains(cfg);
  if (command == "phase") return cmd_phase(cfg);
  if (command == "sweep") return cmd_sweep(cfg);
  if (command == "levels") return cmd_levels(cfg);
  if (command == "monodromy") return cmd_monodromy(cfg);
  fail(ErrorKind::InvalidArgument, "unknown command '" + command + "'");
}

}  // namespace epberry::cli
