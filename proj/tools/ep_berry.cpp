// ep-berry: exceptional points, Jordan chains and geometric phases of
// parametrized non-Hermitian Hamiltonians.
//
//   ep-berry <locate-ep|chains|phase|sweep|levels|monodromy> --config <path>
//            [--method M] [--eps e1,e2,...] [--out <path>] [--seed S]
//
// Exit codes: 0 ok, 1 usage/config error, 2 numerical failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "epberry/cli.hpp"

namespace {

int write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    std::cerr << "ep-berry: cannot write '" << path << "'\n";
    return 1;
  }
  f << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exceptional points and geometric phases of non-Hermitian Hamiltonians", "ep-berry"};
  std::string command, config_path, method, out;
  std::vector<double> eps;
  std::uint64_t seed = 0;
  app.add_option("command", command, "locate-ep | chains | phase | sweep | levels | monodromy")
      ->required()
      ->check(CLI::IsMember(epberry::cli::command_names()));
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  auto* m_opt = app.add_option("--method", method, "phase method: double | winding | versal | all");
  auto* e_opt = app.add_option("--eps", eps, "epsilon list for sweep")->delimiter(',');
  auto* o_opt = app.add_option("--out", out, "write the JSON result here instead of stdout");
  auto* s_opt = app.add_option("--seed", seed, "seed of the built-in family generator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    epberry::cli::RunConfig cfg = epberry::cli::load_config(config_path);
    epberry::cli::Overrides ov;
    if (*m_opt) ov.method = method;
    if (*e_opt) ov.eps = eps;
    if (*o_opt) ov.out = out;
    if (*s_opt) ov.seed = seed;
    epberry::cli::apply(cfg, ov);

    const auto result = epberry::cli::run(command, cfg);
    const std::string text = epberry::dump_json(result.json);
    if (!cfg.csv.empty() && !result.csv.empty())
      if (int rc = write_text(cfg.csv, result.csv)) return rc;
    if (cfg.out.empty()) {
      std::cout << text;
      return 0;
    }
    return write_text(cfg.out, text);
  } catch (const epberry::Error& e) {
    std::cerr << "ep-berry: " << epberry::to_string(e.kind()) << ": " << e.what() << "\n";
    return e.is_usage() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "ep-berry: internal error: " << e.what() << "\n";
    return 2;
  }
}
