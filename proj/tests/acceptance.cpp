// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "epberry/cli.hpp"

using namespace epberry;

namespace {

RealVector xy(double x, double y) { return detail::vec2(x, y); }

ParameterLoop around(const std::string& name, double eps, std::size_t n,
                     const LoopShape& shape = circle_shape()) {
  return ParameterLoop(builtin_ep(name), shape, eps, n);
}

PairSelector sel_for(const HamiltonianFamily& f, const ParameterLoop& loop) {
  return pair_near(f, loop.point(0), 0.0);
}

JordanData chains(const HamiltonianFamily& f, const std::string& name) {
  return jordan_chains(f, builtin_ep(name), 0.0);
}

double off_pi(cplx g) { return std::abs(cplx(wrap_angle(g.real() - kPi), g.imag())); }

// Collects failed sub-checks of one criterion.
struct Report {
  std::ostringstream why;
  bool ok = true;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why << (why.tellp() > 0 ? "; " : "") << what;
    }
  }
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

std::string num(cplx z) { return "(" + num(z.real()) + ", " + num(z.imag()) + ")"; }

void criterion_1(Report& r) {
  const std::pair<const char*, double> cases[] = {{"sym2", 0.1}, {"sym2", 0.5}, {"sym3", 0.05}, {"sym3", 0.1}};
  for (const auto& [name, eps] : cases) {
    const auto f = builtin(name);
    const auto loop = around(name, eps, 2048);
    const cplx g = phase_double_cycle(f, loop, sel_for(f, loop)).gamma;
    r.require(off_pi(g) <= 1e-6 && std::abs(g.imag()) <= 1e-6,
              std::string(name) + " eps " + num(eps) + " gamma " + num(g));
  }
}

void criterion_2(Report& r) {
  const auto f = builtin("gen2");
  for (const auto& shape : {circle_shape(), ellipse_shape(3.0)})
    for (double eps : {0.3, 1.0}) {
      const auto loop = around("gen2", eps, 1024, shape);
      const cplx g = phase_double_cycle(f, loop, sel_for(f, loop)).gamma;
      r.require(off_pi(g) <= 1e-6, shape.name + " eps " + num(eps) + " gamma " + num(g));
    }
}

void criterion_3(Report& r) {
  for (const auto& name : builtin_names()) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    for (const auto& shape : {circle_shape(), ellipse_shape(3.0)}) {
      const auto loop = around(name, 0.1, 512, shape);
      const auto sel = sel_for(f, loop);
      const auto dc = phase_double_cycle(f, loop, sel);
      const auto vs = phase_versal(f, loop, jd, sel);
      double tol = std::max({1e-6, dc.discretization_error, vs.discretization_error});
      r.require(phase_distance(dc.gamma, vs.gamma) <= tol, name + " " + shape.name + " versal");
      if (f.is_symmetric()) {
        const auto wd = phase_winding_symmetric(f, loop, sel);
        tol = std::max(tol, wd.discretization_error);
        r.require(phase_distance(dc.gamma, wd.gamma) <= tol, name + " " + shape.name + " winding");
      }
    }
  }
}

void criterion_4(Report& r) {
  for (const auto& name : builtin_names()) {
    const auto f = builtin(name);
    const auto loop = around(name, 0.1, 256);
    const auto t = track_pair(f, loop, sel_for(f, loop), 2);
    r.require(is_swap(t.monodromy(1)), name + " one cycle does not swap");
    r.require(is_identity(t.monodromy(2)), name + " two cycles do not restore");
  }
  const auto f = builtin("gen2");
  const auto outside = ParameterLoop(xy(3, 0), circle_shape(), 1.0, 512);
  const auto t = track_pair(f, outside, {0}, 1);
  r.require(is_identity(t.monodromy(1)), "non-enclosing loop not identity");
  PhaseOptions o;
  o.cycles = 1;
  const cplx g = phase_double_cycle(f, outside, {0}, o).gamma;
  r.require(std::abs(cplx(wrap_angle(g.real()), g.imag())) <= 1e-6, "non-enclosing gamma " + num(g));
}

void criterion_5(Report& r) {
  const auto f = builtin("gen3");
  const auto jd = chains(f, "gen3");
  const auto loop = around("gen3", 0.1, 512);
  const auto sel = sel_for(f, loop);
  const auto d = phase_decomposition(f, loop, jd, sel);
  const cplx res = versal_residual_integral(versal_along_loop(track_pair(f, loop, sel, 1), jd));
  r.require(std::abs(d.i2) <= 1e-6, "|I2| = " + num(std::abs(d.i2)));
  r.require(std::abs(d.i3 - 2.0 * res) <= 1e-8, "|I3 - 2R| = " + num(std::abs(d.i3 - 2.0 * res)));
  r.require(std::abs(std::abs(d.i1) - kPi) <= 1e-6, "|I1| = " + num(std::abs(d.i1)));
}

void criterion_6(Report& r) {
  for (const char* name : {"gen3", "gen4"})
    for (std::uint64_t seed : {1, 2, 3, 7}) {
      BuiltinOptions o;
      o.seed = seed;
      const auto f = builtin(name, o);
      const auto jd = chains(f, name);
      for (const auto& shape : {circle_shape(), ellipse_shape(3.0)}) {
        const cplx ad = correction_direct(f, jd, shape).value;
        const cplx as = correction_spectral(f, jd, shape).value;
        r.require(std::abs(ad - as) <= 1e-8 * (1 + std::abs(ad)),
                  std::string(name) + " seed " + std::to_string(seed) + " " + shape.name);
      }
    }
}

void criterion_7(Report& r) {
  for (const char* name : {"gen3", "gen4"}) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    const auto sw = epsilon_sweep(f, jd, circle_shape(), {0.02, 0.04, 0.08}, 512);
    const cplx a = correction_direct(f, jd, circle_shape()).value;
    r.require(sw.resolved, std::string(name) + " unresolved: " + sw.note);
    r.require(std::abs(sw.fitted_exponent - 2.0) <= 0.1,
              std::string(name) + " exponent " + num(sw.fitted_exponent));
    r.require(std::abs(sw.fitted_coefficient - a) <= 0.05 * std::abs(a),
              std::string(name) + " coefficient " + num(sw.fitted_coefficient) + " vs " + num(a));
  }
}

void criterion_8(Report& r) {
  for (const char* name : {"gen2", "sym3"}) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    for (const auto& shape : {circle_shape(), ellipse_shape(3.0)}) {
      const cplx a = correction_direct(f, jd, shape).value;
      r.require(std::abs(a) <= 1e-8, std::string(name) + " " + shape.name + " a " + num(a));
    }
  }
  const auto f = builtin("gen3");
  const cplx a = correction_direct(f, chains(f, "gen3"), circle_shape()).value;
  r.require(std::abs(a) > 1e-6, "gen3 a " + num(a));
}

void criterion_9(Report& r) {
  auto make = [](double d) {
    BuiltinOptions o;
    o.delta = d;
    return builtin("gen3", o);
  };
  const auto rep = divergence_scan(make, xy(0, 0), 0.0, {1, 0.5, 0.25, 0.125, 0.0625}, circle_shape());
  r.require(!rep.truncated, "scan truncated: " + rep.note);
  r.require(rep.slope >= -3.3 && rep.slope <= -2.7, "slope " + num(rep.slope));
}

void criterion_10(Report& r) {
  for (const auto& name : builtin_names()) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    const auto& res = jd.residuals;
    r.require(std::max({res.orthogonality, res.norm_10, res.norm_01, res.norm_11}) <= 1e-8,
              name + " chain normalization");
    const auto loop = around(name, 0.1, 256);
    const auto frame = versal_along_loop(track_pair(f, loop, sel_for(f, loop), 1), jd);
    r.require(frame.max_normalization_residual <= 1e-8, name + " versal normalization");
    const auto spec = spectators(f, jd);
    r.require(identity_resolution_residual(jd, spec) <= 1e-9, name + " identity resolution");
    r.require(jordan_reconstruction_residual(f, jd, spec) <= 1e-9, name + " reconstruction");
  }
  for (const char* name : {"sym2", "sym3"}) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    std::vector<double> lx, ly;
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
      lx.push_back(std::log(eps));
      ly.push_back(std::log(std::abs(symmetric_overlap_ratio(f, jd, jd.x_ep + xy(0.6 * eps, -0.8 * eps)) - 1.0)));
    }
    const double slope = fit_line(lx, ly).slope;
    r.require(slope >= 0.5, std::string(name) + " overlap exponent " + num(slope));
  }
}

std::string cli_output(const std::string& command, const Json& doc, const char* threads) {
  setenv("EP_BERRY_THREADS", threads, 1);
  return dump_json(cli::run(command, cli::parse_config(doc)).json);
}

void criterion_11(Report& r) {
  // Wilson product under random per-sample rescaling of the eigenvectors
  for (const char* name : {"gen3", "gen4", "sym3"}) {
    const auto f = builtin(name);
    const auto loop = around(name, 0.1, 256);
    const auto sel = sel_for(f, loop);
    TrackOptions opt;
    opt.gauge = [](std::size_t k, int b) {
      Lcg rng(1000 + 7 * k + static_cast<std::size_t>(b));
      return std::polar(0.2 + 3 * rng.uniform(), 2 * kPi * rng.uniform());
    };
    const auto a = track_pair(f, loop, sel, 2);
    const auto g = track_pair(f, loop, sel, 2, opt);
    r.require(std::abs(wilson_product(a) - wilson_product(g)) <= 1e-8 * std::abs(wilson_product(a)),
              std::string(name) + " Wilson product gauge");
    r.require(phase_distance(phase_from_track(a), phase_from_track(g)) <= 1e-8,
              std::string(name) + " Wilson phase gauge");
  }
  // residual gauge of the Jordan chains
  for (const char* name : {"gen3", "gen4"}) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    const auto g = regauge(jd, cplx(-1.3, 0.4), cplx(0.25, -2.0));
    const RealVector x = jd.x_ep + xy(0.03, -0.02);
    r.require(std::abs(mu_at(jd, x) - mu_at(g, x)) <= 1e-8 * (1 + std::abs(mu_at(jd, x))),
              std::string(name) + " mu gauge");
    const cplx a1 = correction_direct(f, jd, circle_shape()).value;
    const cplx a2 = correction_direct(f, g, circle_shape()).value;
    r.require(std::abs(a1 - a2) <= 1e-8, std::string(name) + " a gauge");
    const auto loop = around(name, 0.1, 256);
    const auto sel = sel_for(f, loop);
    r.require(phase_distance(phase_versal(f, loop, jd, sel).gamma, phase_versal(f, loop, g, sel).gamma) <= 1e-8,
              std::string(name) + " gamma gauge");
  }
  // orientation reversal: p winding and residual flip, gamma - pi changes sign
  for (const char* name : {"gen3", "gen4", "sym2"}) {
    const auto f = builtin(name);
    const auto jd = chains(f, name);
    const auto fwd = around(name, 0.1, 256);
    const auto bwd = around(name, 0.1, 256, reversed(circle_shape()));
    const auto ff = versal_along_loop(track_pair(f, fwd, sel_for(f, fwd), 1), jd);
    const auto fb = versal_along_loop(track_pair(f, bwd, sel_for(f, bwd), 1), jd);
    r.require(p_winding(ff) == -p_winding(fb), std::string(name) + " p winding");
    r.require(std::abs(versal_residual_integral(ff) + versal_residual_integral(fb)) <= 1e-8,
              std::string(name) + " residual orientation");
    const cplx gf = phase_double_cycle(f, fwd, sel_for(f, fwd)).gamma;
    const cplx gb = phase_double_cycle(f, bwd, sel_for(f, bwd)).gamma;
    r.require(std::abs(cplx(wrap_angle(gf.real() - kPi), gf.imag()) + cplx(wrap_angle(gb.real() - kPi), gb.imag())) <=
                  1e-6,
              std::string(name) + " gamma orientation");
  }
  // CLI output is byte-identical across runs and worker counts
  const Json phase_doc = Json::parse(R"({"family": {"builtin": "gen4", "seed": 3}, "loop": {"samples": 128}})");
  const Json sweep_doc = Json::parse(R"({"family": {"builtin": "gen3"}, "loop": {"samples": 256},
                                         "sweep": {"eps": [0.02, 0.04, 0.08]}})");
  for (const auto& [cmd, doc] : {std::pair{"phase", phase_doc}, std::pair{"sweep", sweep_doc}}) {
    const std::string one = cli_output(cmd, doc, "1");
    const std::string four = cli_output(cmd, doc, "4");
    const std::string again = cli_output(cmd, doc, "4");
    r.require(one == four && four == again, std::string("CLI ") + cmd + " not deterministic");
  }
  unsetenv("EP_BERRY_THREADS");
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Report&)>> criteria[] = {
      {"symmetric topological phase", criterion_1},
      {"2x2 general case", criterion_2},
      {"method concordance", criterion_3},
      {"monodromy", criterion_4},
      {"phase decomposition", criterion_5},
      {"correction-constant equivalence", criterion_6},
      {"epsilon-squared law", criterion_7},
      {"null correction", criterion_8},
      {"divergence", criterion_9},
      {"structural identities", criterion_10},
      {"invariance suite", criterion_11},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Report r;
    try {
      run(r);
    } catch (const std::exception& e) {
      r.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (r.ok ? "PASS" : "FAIL") << " " << index << " " << name;
    if (!r.ok) std::cout << ": " << r.why.str();
    std::cout << std::endl;
    failed += r.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
