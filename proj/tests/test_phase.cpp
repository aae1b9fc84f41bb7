#include <gtest/gtest.h>

#include "epberry/asymptotics.hpp"
#include "epberry/phase.hpp"

using namespace epberry;

namespace {

const cplx I{0.0, 1.0};

RealVector xy(double x, double y) { return detail::vec2(x, y); }

ParameterLoop around(const std::string& name, double eps, std::size_t n,
                     const LoopShape& shape = circle_shape()) {
  return ParameterLoop(builtin_ep(name), shape, eps, n);
}

PairSelector sel_for(const HamiltonianFamily& f, const ParameterLoop& loop) {
  return pair_near(f, loop.point(0), 0.0);
}

// distance of gamma from pi on the circle, plus |Im gamma|
double off_pi(cplx g) { return std::abs(cplx(wrap_angle(g.real() - kPi), g.imag())); }

}  // namespace

TEST(DoubleCycle, Sym2HalfCircle) {
  const auto f = builtin("sym2");
  const auto loop = around("sym2", 0.5, 512);
  const auto r = phase_double_cycle(f, loop, sel_for(f, loop));
  EXPECT_LE(off_pi(r.gamma), 1e-6);
  EXPECT_LE(std::abs(r.gamma.imag()), 1e-6);
  EXPECT_EQ(r.method, PhaseMethod::DoubleCycle);
  EXPECT_GE(r.discretization_error, 0.0);
}

TEST(DoubleCycle, Gen2UnitCircle) {
  const auto f = builtin("gen2");
  const auto loop = around("gen2", 1.0, 512);
  EXPECT_LE(off_pi(phase_double_cycle(f, loop, {0}).gamma), 1e-6);
}

TEST(DoubleCycle, NonEnclosingLoopGivesZero) {
  const auto f = builtin("gen2");
  const auto loop = circle_loop(xy(3, 0), {0, 1}, 1.0, 512);
  PhaseOptions o;
  o.cycles = 1;
  const auto r = phase_double_cycle(f, loop, {0}, o);
  EXPECT_LE(std::abs(r.gamma), 1e-6);
}

TEST(DoubleCycle, SingleCycleAroundEpRejected) {
  const auto f = builtin("gen2");
  PhaseOptions o;
  o.cycles = 1;
  EXPECT_THROW(phase_double_cycle(f, around("gen2", 1.0, 64), {0}, o), Error);
}

TEST(DoubleCycle, ShapeIndependentForTopologicalCases) {
  for (const char* name : {"sym2", "sym3", "gen2"}) {
    const auto f = builtin(name);
    for (const auto& shape : {circle_shape(), ellipse_shape(3.0), star_shape(5, 0.3)}) {
      const double eps = std::string(name) == "sym3" ? 0.1 : 0.5;
      const auto loop = around(name, eps, 512, shape);
      const auto r = phase_double_cycle(f, loop, sel_for(f, loop));
      EXPECT_LE(off_pi(r.gamma), 1e-6) << name << " " << shape.name;
    }
  }
}

TEST(DoubleCycle, ErrorEstimateBoundsTrueError) {
  for (const char* name : {"gen3", "gen4"}) {
    const auto f = builtin(name);
    const auto coarse = around(name, 0.1, 64);
    const auto r = phase_double_cycle(f, coarse, sel_for(f, coarse));
    const auto ref = phase_double_cycle(f, around(name, 0.1, 4096), sel_for(f, coarse));
    EXPECT_LE(std::abs(r.gamma - ref.gamma), std::max(r.discretization_error, 1e-12)) << name;
  }
}

TEST(Wilson, GaugeInvariant) {
  for (const char* name : {"gen3", "gen4", "sym3"}) {
    const auto f = builtin(name);
    const auto loop = around(name, 0.1, 256);
    const auto sel = sel_for(f, loop);
    TrackOptions opt;
    opt.gauge = [](std::size_t k, int b) {
      // deterministic pseudo-random moduli and phases per sample
      Lcg rng(1000 + 7 * k + static_cast<std::size_t>(b));
      return std::polar(0.2 + 3 * rng.uniform(), 2 * kPi * rng.uniform());
    };
    const auto a = track_pair(f, loop, sel, 2);
    const auto g = track_pair(f, loop, sel, 2, opt);
    const cplx wa = wilson_product(a), wg = wilson_product(g);
    EXPECT_LT(std::abs(wa - wg), 1e-8 * std::abs(wa)) << name;
    EXPECT_LT(phase_distance(phase_from_track(a), phase_from_track(g)), 1e-8) << name;
  }
}

TEST(Winding, Sym2EnclosingAndNot) {
  const auto f = builtin("sym2");
  const auto in = around("sym2", 0.5, 256);
  const auto r = phase_winding_symmetric(f, in, {0});
  EXPECT_DOUBLE_EQ(r.gamma.real(), kPi);
  EXPECT_EQ(r.gamma.imag(), 0.0);
  EXPECT_EQ(r.method, PhaseMethod::Winding);
  const auto out = circle_loop(xy(0, 3), {0, 1}, 0.5, 256);
  EXPECT_EQ(phase_winding_symmetric(f, out, {0}).gamma, cplx(0.0));
}

TEST(Winding, Sym3SmallCircle) {
  const auto f = builtin("sym3");
  const auto loop = around("sym3", 0.05, 256);
  EXPECT_DOUBLE_EQ(phase_winding_symmetric(f, loop, sel_for(f, loop)).gamma.real(), kPi);
}

TEST(Winding, GeneralFamilyRejected) {
  const auto f = builtin("gen3");
  const auto loop = around("gen3", 0.1, 64);
  try {
    phase_winding_symmetric(f, loop, sel_for(f, loop));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    EXPECT_NE(std::string(e.what()).find("symmetric"), std::string::npos);
  }
}

TEST(Versal, Gen2ResidualVanishes) {
  const auto f = builtin("gen2");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  for (const auto& shape : {circle_shape(), ellipse_shape(3.0)}) {
    const auto r = phase_versal(f, around("gen2", 1.0, 256, shape), jd, {0});
    EXPECT_LE(std::abs(r.gamma - kPi), 1e-8);
  }
}

TEST(Versal, Sym3ResidualVanishes) {
  const auto f = builtin("sym3");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  for (double eps : {0.05, 0.1}) {
    const auto loop = around("sym3", eps, 256);
    const auto r = phase_versal(f, loop, jd, sel_for(f, loop));
    EXPECT_LE(off_pi(r.gamma), 1e-8) << eps;
  }
}

TEST(Versal, Gen3DeviationMatchesCorrectionConstant) {
  const auto f = builtin("gen3");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  const double eps = 0.1;
  const auto loop = around("gen3", eps, 512);
  const auto r = phase_versal(f, loop, jd, sel_for(f, loop));
  const cplx a = correction_direct(f, jd, circle_shape()).value;
  const cplx dev(wrap_angle(r.gamma.real() - kPi), r.gamma.imag());
  const cplx pred = I * a * eps * eps;
  // agreement up to the O(eps^3) term
  EXPECT_LT(std::abs(dev - pred), 0.15 * std::abs(pred));
  EXPECT_GT(std::abs(dev), 1e-4);
}

TEST(Concordance, AllMethodsAgreeOnBuiltins) {
  for (const auto& name : builtin_names()) {
    const auto f = builtin(name);
    const auto jd = jordan_chains(f, builtin_ep(name), 0.0);
    for (const auto& shape : {circle_shape(), ellipse_shape(3.0), star_shape(3, 0.2)}) {
      const auto loop = around(name, 0.1, 256, shape);
      const auto sel = sel_for(f, loop);
      const auto dc = phase_double_cycle(f, loop, sel);
      const auto vs = phase_versal(f, loop, jd, sel);
      const double tol = std::max({1e-6, dc.discretization_error, vs.discretization_error});
      EXPECT_LE(phase_distance(dc.gamma, vs.gamma), tol) << name << " " << shape.name;
      if (f.is_symmetric()) {
        const auto wd = phase_winding_symmetric(f, loop, sel);
        EXPECT_LE(phase_distance(dc.gamma, wd.gamma), std::max(tol, wd.discretization_error))
            << name << " " << shape.name;
      }
    }
  }
}

TEST(Orientation, ReversalNegatesResidualAndWinding) {
  for (const char* name : {"gen3", "gen4", "sym2"}) {
    const auto f = builtin(name);
    const auto jd = jordan_chains(f, builtin_ep(name), 0.0);
    const auto fwd = around(name, 0.1, 256);
    const auto bwd = around(name, 0.1, 256, reversed(circle_shape()));
    const auto tf = track_pair(f, fwd, sel_for(f, fwd), 1);
    const auto tb = track_pair(f, bwd, sel_for(f, bwd), 1);
    const auto ff = versal_along_loop(tf, jd);
    const auto fb = versal_along_loop(tb, jd);
    EXPECT_EQ(p_winding(ff), -p_winding(fb)) << name;
    EXPECT_LT(std::abs(versal_residual_integral(ff) + versal_residual_integral(fb)), 1e-8) << name;
    const auto gf = phase_double_cycle(f, fwd, sel_for(f, fwd)).gamma;
    const auto gb = phase_double_cycle(f, bwd, sel_for(f, bwd)).gamma;
    // gamma - pi changes sign with the direction
    EXPECT_LT(std::abs(cplx(wrap_angle(gf.real() - kPi), gf.imag()) +
                       cplx(wrap_angle(gb.real() - kPi), gb.imag())),
              1e-6)
        << name;
  }
  const auto f = builtin("sym2");
  const auto bwd = around("sym2", 0.5, 256, reversed(circle_shape()));
  EXPECT_LE(off_pi(phase_double_cycle(f, bwd, {0}).gamma), 1e-6);
  EXPECT_LE(off_pi(phase_winding_symmetric(f, bwd, {0}).gamma), 1e-12);
}

TEST(Decomposition, Gen2) {
  const auto f = builtin("gen2");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  const auto d = phase_decomposition(f, around("gen2", 1.0, 256), jd, {0});
  EXPECT_NEAR(std::abs(d.i1), kPi, 1e-6);
  EXPECT_LE(std::abs(d.i2), 1e-6);
  EXPECT_LE(std::abs(d.i3), 1e-6);
}

TEST(Decomposition, Gen3ThirdIntegralIsTwiceResidual) {
  const auto f = builtin("gen3");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  const auto loop = around("gen3", 0.1, 512);
  const auto sel = sel_for(f, loop);
  const auto d = phase_decomposition(f, loop, jd, sel);
  const auto one = track_pair(f, loop, sel, 1);
  const cplx res = versal_residual_integral(versal_along_loop(one, jd));
  EXPECT_NEAR(std::abs(d.i1), kPi, 1e-6);
  EXPECT_LE(std::abs(d.i2), 1e-6);
  EXPECT_LE(std::abs(d.i3 - 2.0 * res), 1e-8);
  EXPECT_GT(std::abs(d.i3), 1e-4);
  // the three pieces add up to the double-cycle phase
  const auto dc = phase_double_cycle(f, loop, sel);
  EXPECT_LE(phase_distance(d.i1 + d.i2 + 0.5 * d.i3, dc.gamma), 1e-6);
}

TEST(Decomposition, Sym3) {
  const auto f = builtin("sym3");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  const auto loop = around("sym3", 0.1, 256);
  const auto d = phase_decomposition(f, loop, jd, sel_for(f, loop));
  EXPECT_LE(std::abs(d.i2), 1e-6);
  EXPECT_LE(std::abs(d.i3), 1e-6);
}

TEST(Decomposition, ReportedByVersalOnRequest) {
  const auto f = builtin("gen3");
  const auto jd = jordan_chains(f, xy(0, 0), 0.0);
  const auto loop = around("gen3", 0.1, 256);
  PhaseOptions o;
  o.decomposition = true;
  const auto r = phase_versal(f, loop, jd, sel_for(f, loop), o);
  ASSERT_TRUE(r.decomposition.has_value());
  EXPECT_FALSE(phase_versal(f, loop, jd, sel_for(f, loop)).decomposition.has_value());
}

TEST(Dynamical, ConstantLevel) {
  ComplexMatrix a0(2, 2), z = ComplexMatrix::Zero(2, 2);
  const cplx e0(0.7, -0.2);
  a0 << e0, 0, 0, e0 + 1.0;
  HamiltonianFamily f("const", {a0, z, z});
  const auto t = track_pair(f, circle_loop(xy(0, 0), {0, 1}, 1.0, 32), {0}, 2);
  const double period = 1.5;
  EXPECT_LT(std::abs(dynamical_phase(t, period) - (-e0 * 2.0 * period)), 1e-13);
  EXPECT_LT(std::abs(dynamical_phase(t, period, 2.0) - (-e0 * period)), 1e-13);
}

TEST(Dynamical, Gen2AgainstRefinedQuadrature) {
  const auto f = builtin("gen2");
  const auto coarse = track_pair(f, around("gen2", 1.0, 256), {0}, 2);
  const auto fine = track_pair(f, around("gen2", 1.0, 2560), {0}, 2);
  const cplx d1 = dynamical_phase(coarse, 1.0);
  const cplx d2 = dynamical_phase(fine, 1.0);
  EXPECT_LT(std::abs(d1 - d2), 1e-8);
  // E(t) = +-exp(i pi t) over the double cycle integrates to zero
  EXPECT_LT(std::abs(d2), 1e-8);
  EXPECT_LT(std::abs(dynamical_phase(coarse, 1.0, 2.0) - 0.5 * d1), 1e-15);
}

TEST(Dynamical, HbarMustBePositive) {
  const auto f = builtin("gen2");
  const auto t = track_pair(f, around("gen2", 1.0, 32), {0}, 2);
  EXPECT_THROW(dynamical_phase(t, 1.0, 0.0), Error);
}
