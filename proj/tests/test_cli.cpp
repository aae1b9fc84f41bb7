#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "epberry/json_io.hpp"

namespace {

using nlohmann::json;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) { return ::testing::TempDir() + "cli_" + name; }

std::string write_config(const std::string& name, const std::string& text) {
  const std::string path = tmp(name + ".json");
  std::ofstream(path) << text;
  return path;
}

Run ep_berry(const std::string& args, const std::string& env = "") {
  const std::string out = tmp("stdout"), err = tmp("stderr");
  const std::string cmd = env + " " EP_BERRY_BIN " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json parse(const Run& r) { return json::parse(r.out); }

double cabs(const json& z) { return std::hypot(z[0].get<double>(), z[1].get<double>()); }

double off_pi(const json& z) {
  const double re = z[0].get<double>(), im = z[1].get<double>();
  return std::hypot(epberry::wrap_angle(re - epberry::kPi), im);
}

}  // namespace

TEST(Cli, LocateGen2) {
  const auto cfg = write_config("loc_gen2", R"({"family": {"builtin": "gen2"}, "ep": {"guess": [0.3, -0.2]}})");
  const auto r = ep_berry("locate-ep --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_EQ(j.begin().key(), "config");
  EXPECT_LT(std::hypot(j["x_ep"][0].get<double>(), j["x_ep"][1].get<double>()), 1e-10);
  EXPECT_LT(cabs(j["e_ep"]), 1e-10);
}

TEST(Cli, MalformedConfigNamesField) {
  const auto cfg = write_config("bad_field", R"({"family": {"builtin": "gen2"}, "loop": {"epsilon": "big"}})");
  const auto r = ep_berry("phase --config " + cfg);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("loop.epsilon"), std::string::npos) << r.err;

  const auto typo = write_config("typo", R"({"family": {"builtin": "gen2"}, "loop": {"epsilom": 0.1}})");
  const auto r2 = ep_berry("phase --config " + typo);
  EXPECT_EQ(r2.code, 1);
  EXPECT_NE(r2.err.find("epsilom"), std::string::npos) << r2.err;

  const auto broken = write_config("broken", R"({"family": {"builtin": "gen2"})");
  EXPECT_EQ(ep_berry("phase --config " + broken).code, 1);
  EXPECT_EQ(ep_berry("phase --config " + tmp("missing.json")).code, 1);
}

TEST(Cli, UsageErrors) {
  const auto cfg = write_config("usage", R"({"family": {"builtin": "gen2"}})");
  EXPECT_EQ(ep_berry("frobnicate --config " + cfg).code, 1);
  EXPECT_EQ(ep_berry("phase").code, 1);
  EXPECT_EQ(ep_berry("phase --config " + cfg + " --method bogus").code, 1);
}

TEST(Cli, NewtonFailureIsNumerical) {
  const auto cfg = write_config("far", R"({"family": {"builtin": "gen3"}, "ep": {"guess": [3.0, -2.5]},
                                         "locate": {"max_iterations": 2}})");
  const auto r = ep_berry("locate-ep --config " + cfg);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Newton did not converge"), std::string::npos) << r.err;
}

TEST(Cli, ChainsGen2AndSym2) {
  const auto g2 = write_config("ch_gen2", R"({"family": {"builtin": "gen2"}})");
  const auto r = ep_berry("chains --config " + g2);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_LT(j["chains"]["residuals"]["norm_11"].get<double>(), 1e-12);
  EXPECT_TRUE(j["ep_tangent"].empty());

  const auto s2 = write_config("ch_sym2", R"({"family": {"builtin": "sym2"}})");
  const auto r2 = ep_berry("chains --config " + s2);
  ASSERT_EQ(r2.code, 0) << r2.err;
  const auto c = parse(r2)["chains"];
  EXPECT_EQ(c["chi0"], c["tchi0"]);
  EXPECT_EQ(c["chi1"], c["tchi1"]);
}

TEST(Cli, ChainsRefusedNearTripleDegeneracy) {
  const auto cfg = write_config("triple", R"({"family": {"builtin": "gen3", "delta": [1e-5, 0]},
                                            "ep": {"x": [0, 0], "energy": [0, 0]}})");
  const auto r = ep_berry("chains --config " + cfg);
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, PhaseSym2AllMethods) {
  const auto cfg = write_config("ph_sym2", R"({"family": {"builtin": "sym2"}, "loop": {"epsilon": 0.5, "samples": 256}})");
  const auto r = ep_berry("phase --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  ASSERT_EQ(j["results"].size(), 3u);
  for (const auto& res : j["results"]) EXPECT_LE(off_pi(res["gamma"]), 1e-6) << res["method"];
  EXPECT_TRUE(j["encircles_ep"].get<bool>());
}

TEST(Cli, PhaseGen2) {
  const auto cfg = write_config("ph_gen2", R"({"family": {"builtin": "gen2"}, "loop": {"epsilon": 1.0, "samples": 256}})");
  const auto r = ep_berry("phase --config " + cfg + " --method double");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  ASSERT_EQ(j["results"].size(), 1u);
  EXPECT_LE(off_pi(j["results"][0]["gamma"]), 1e-6);
  EXPECT_EQ(j["config"]["phase"]["method"], "double");
}

TEST(Cli, WindingOnGeneralFamilyIsUsageError) {
  const auto cfg = write_config("ph_gen3", R"({"family": {"builtin": "gen3"}})");
  const auto r = ep_berry("phase --config " + cfg + " --method winding");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("symmetric"), std::string::npos) << r.err;
}

TEST(Cli, PhaseCsvDump) {
  const std::string csv = tmp("versal.csv");
  const auto cfg = write_config("ph_csv", R"({"family": {"builtin": "gen3"}, "loop": {"samples": 64},
                                           "output": {"csv": ")" + csv + R"("}})");
  const auto r = ep_berry("phase --config " + cfg + " --method versal");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(csv);
  EXPECT_EQ(text.rfind("t,re_s,im_s,re_p,im_p,re_sqrt_p,im_sqrt_p\n", 0), 0u);
  EXPECT_GT(std::count(text.begin(), text.end(), '\n'), 64);
}

TEST(Cli, SweepFlatAndEmpty) {
  const auto cfg = write_config("sw_sym3", R"({"family": {"builtin": "sym3"}, "loop": {"samples": 256},
                                            "sweep": {"eps": [0.02, 0.05]}})");
  const auto r = ep_berry("sweep --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  for (const auto& e : j["sweep"]) EXPECT_LE(cabs(e["gamma_minus_pi"]), 1e-6);
  EXPECT_FALSE(j["resolved"].get<bool>());

  const auto none = write_config("sw_none", R"({"family": {"builtin": "sym3"}})");
  EXPECT_EQ(ep_berry("sweep --config " + none).code, 1);
  const auto empty = write_config("sw_empty", R"({"family": {"builtin": "sym3"}, "sweep": {"eps": []}})");
  EXPECT_EQ(ep_berry("sweep --config " + empty).code, 1);
}

TEST(Cli, SweepGen3WithEpsFlag) {
  const std::string csv = tmp("sweep.csv");
  const auto cfg = write_config("sw_gen3", R"({"family": {"builtin": "gen3"}, "loop": {"samples": 512},
                                            "output": {"csv": ")" + csv + R"("}})");
  const auto r = ep_berry("sweep --config " + cfg + " --eps 0.02,0.04,0.08");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_NEAR(j["fitted_exponent"].get<double>(), 2.0, 0.1);
  EXPECT_EQ(j["config"]["sweep"]["eps"].size(), 3u);
  const std::string text = slurp(csv);
  EXPECT_EQ(text.rfind("epsilon,re_gamma,im_gamma,re_gamma_minus_pi,im_gamma_minus_pi,error_estimate\n", 0), 0u);
}

TEST(Cli, LevelsScan) {
  const auto cfg = write_config("lv_gen3", R"({"family": {"builtin": "gen3"},
                                            "levels": {"deltas": [1, 0.5, 0.25, 0.125, 0.0625]}})");
  const auto r = ep_berry("levels --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  const double slope = j["delta_scan"]["slope"].get<double>();
  EXPECT_GE(slope, -3.3);
  EXPECT_LE(slope, -2.7);
  EXPECT_LE(j["identity_resolution_residual"].get<double>(), 1e-9);
}

TEST(Cli, Monodromy) {
  const auto in = write_config("mono_in", R"({"family": {"builtin": "gen2"}, "loop": {"epsilon": 1.0, "samples": 64}})");
  auto r = ep_berry("monodromy --config " + in);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(parse(r)["swap"].get<bool>());
  EXPECT_EQ(parse(r)["two_cycles"], json::array({0, 1}));

  const auto out = write_config("mono_out", R"({"family": {"builtin": "gen2"}, "pair": 0,
                                             "loop": {"center": [3, 0], "epsilon": 1.0, "samples": 64}})");
  r = ep_berry("monodromy --config " + out);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(parse(r)["swap"].get<bool>());

  const auto through = write_config("mono_deg", R"({"family": {"builtin": "gen2"}, "pair": 0,
                                                 "loop": {"center": [1, 0], "epsilon": 1.0, "samples": 64}})");
  EXPECT_EQ(ep_berry("monodromy --config " + through).code, 2);
}

TEST(Cli, NonEnclosingPhaseIsZero) {
  const auto cfg = write_config("ph_out", R"({"family": {"builtin": "gen2"}, "pair": 0,
                                           "loop": {"center": [3, 0], "epsilon": 1.0, "samples": 256}})");
  const auto r = ep_berry("phase --config " + cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = parse(r);
  EXPECT_FALSE(j["encircles_ep"].get<bool>());
  EXPECT_LE(cabs(j["results"][0]["gamma"]), 1e-6);
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
  const auto cfg = write_config("det", R"({"family": {"builtin": "gen4", "seed": 3}, "loop": {"samples": 128}})");
  const auto a = ep_berry("phase --config " + cfg, "EP_BERRY_THREADS=1");
  const auto b = ep_berry("phase --config " + cfg, "EP_BERRY_THREADS=4");
  const auto c = ep_berry("phase --config " + cfg);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_EQ(parse(a)["config"]["family"]["seed"], 3);
}

TEST(Cli, SeedFlagOverridesConfig) {
  const auto cfg = write_config("seed", R"({"family": {"builtin": "gen3", "seed": 3}})");
  const auto r = ep_berry("chains --config " + cfg + " --seed 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse(r)["config"]["family"]["seed"], 5);
}

TEST(Cli, OutFlagWritesFile) {
  const std::string path = tmp("out.json");
  std::remove(path.c_str());
  const auto cfg = write_config("outf", R"({"family": {"builtin": "gen2"}})");
  const auto r = ep_berry("locate-ep --config " + cfg + " --out " + path);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto j = json::parse(slurp(path));
  EXPECT_EQ(j["config"]["output"]["out"], path);
}

TEST(JsonIo, SeventeenDigits) {
  EXPECT_EQ(epberry::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(epberry::format_double(std::nan("")), "null");
  epberry::Json j;
  j["x"] = 1.0 / 3.0;
  j["z"] = epberry::to_json(epberry::cplx(1, -2));
  EXPECT_EQ(epberry::dump_json(j), "{\n  \"x\": 0.33333333333333331,\n  \"z\": [1, -2]\n}\n");
}
