#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stblsim/config.hpp"
#include "stblsim/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw stblsim::ModelError(stblsim::ErrorKind::Config, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stablecoin peg simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<int> horizon;
  std::optional<std::string> out_dir;
  bool strict = false;
  unsigned threads = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--paths", paths, "Number of paths");
  app.add_option("--horizon", horizon, "Steps per path");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--strict", strict, "Exit with 2 on any violated bound");
  app.add_option("--threads", threads, "Worker threads, 0 for all cores");

  auto* run = app.add_subcommand("run", "Simulate and write artifacts");
  auto* replay = app.add_subcommand("replay", "Verify a trajectories file");
  std::string traj_path;
  std::string reference;
  replay->add_option("--trajectories", traj_path, "Trajectories CSV (default <out>/trajectories.csv)");
  replay->add_option("--reference", reference, "Reference trajectories whose Z column must match");
  auto* check = app.add_subcommand("check-assumptions", "Evaluate assumptions at the initial state");
  auto* bounds = app.add_subcommand("bounds", "Theoretical bounds only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  stblsim::RunConfig cfg;
  try {
    cfg = config_path.empty() ? stblsim::parse_config("{}") : stblsim::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (paths) cfg.n_paths = *paths;
    if (horizon) cfg.horizon = *horizon;
    if (out_dir) cfg.output_dir = *out_dir;
    if (strict) cfg.strict = true;
    cfg.validate();
  } catch (const stblsim::ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*run) {
      const auto outcome = stblsim::run(cfg, threads);
      for (const auto& f : outcome.written) std::cout << "wrote " << f << "\n";
      if (outcome.any_violated) std::cout << "bound violated\n";
      return outcome.exit_code;
    }
    if (*replay) {
      if (traj_path.empty()) traj_path = cfg.output_dir + "/trajectories.csv";
      std::optional<std::string> ref;
      if (!reference.empty()) ref = read_file(reference);
      const auto res = stblsim::replay(read_file(traj_path), cfg, ref);
      std::cout << res.message << "\n";
      return res.ok ? 0 : 3;
    }
    if (*check) {
      std::cout << stblsim::assumptions_json(cfg);
      return 0;
    }
    if (*bounds) {
      std::cout << stblsim::bounds_json(cfg);
      return 0;
    }
  } catch (const stblsim::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
