#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "stblsim/config.hpp"
#include "stblsim/runner.hpp"

using namespace stblsim;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ModelError& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("stblsim_io_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  return dir;
}

// Scales the Z cell of data row `row` by `factor`.
std::string perturb_z(const std::string& csv, int row, double factor) {
  std::istringstream in(csv);
  std::string line, out, header;
  int data = -1;
  std::size_t zcol = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      if (data < 0) {
        std::istringstream h(line);
        std::string cell;
        for (std::size_t i = 0; std::getline(h, cell, ','); ++i)
          if (cell == "Z") zcol = i;
      } else if (data == row) {
        std::vector<std::string> cells;
        std::istringstream c(line);
        std::string cell;
        while (std::getline(c, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        std::ostringstream z;
        z.precision(17);
        z << std::stod(cells[zcol]) * factor;
        cells[zcol] = z.str();
        line.clear();
        for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
      }
      ++data;
    }
    out += line + '\n';
  }
  return out;
}

RunConfig stable_config() {
  RunConfig c;
  c.params.kappa = 1.0 / 0.999;
  c.params.r_bound = std::pow(1.5, 1.0 / 365.0);
  c.params.alpha = 1.1;
  c.returns = Lognormal{-0.0005, 0.03};
  c.horizon = 10;
  c.n_paths = 100;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("empty document gives the documented defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.params.demand_D == 100.0);
  CHECK(c.params.beta == 1.5);
  CHECK(std::isinf(c.params.u_bound));
  CHECK(c.initial.L == 100.0);
  CHECK_FALSE(c.initial.Nbar);
  CHECK(std::get<Lognormal>(c.returns).sigma == 0.04);
  CHECK(c.horizon == 100);
  CHECK(c.n_paths == 100);
  CHECK(c.seed == 1);
  CHECK(c.m_levels == std::vector<double>{1.0});
  CHECK(c.output_dir == "out");
  CHECK_FALSE(c.regime_compare);
}

TEST_CASE("invariant violations name the key and the constraint") {
  const auto msg = config_error(R"({"params": {"beta": 0.9}})");
  CHECK(msg.find("params.beta") != std::string::npos);
  CHECK(msg.find("beta > 1") != std::string::npos);

  CHECK(config_error(R"({"run": {"paths": 0}})").find("run.paths") != std::string::npos);
  CHECK(config_error(R"({"run": {"horizon": 0}})").find("run.horizon") != std::string::npos);
  CHECK(config_error(R"({"return_model": {"kind": "lognormal", "sigma": -1}})")
            .find("return_model.sigma") != std::string::npos);
  CHECK(config_error(R"({"schedule": [{"from_step": 3, "return_model": {"kind": "uniform", "lo": 2, "hi": 1}}]})")
            .find("schedule[0].return_model") != std::string::npos);
}

TEST_CASE("unknown keys and wrong types are rejected") {
  CHECK(config_error(R"({"params": {"betta": 2}})").find("params.betta: unknown key") !=
        std::string::npos);
  CHECK(config_error(R"({"paths": 10})").find("paths: unknown key") != std::string::npos);
  CHECK(config_error(R"({"run": {"horizon": "ten"}})").find("run.horizon") !=
        std::string::npos);
  CHECK(config_error(R"({"run": {"horizon": 2.5}})").find("expected an integer") !=
        std::string::npos);
  CHECK(config_error(R"({"params": {"demand_mode": "linear"}})").find("params.demand_mode") !=
        std::string::npos);
  CHECK(config_error(R"({"return_model": {"kind": "cauchy"}})").find("return_model.kind") !=
        std::string::npos);
  CHECK(config_error("{\"run\": ").find("malformed") != std::string::npos);
}

TEST_CASE("serialize then parse is the identity") {
  const std::string doc = R"({
    "params": {"alpha": 1.1, "zeta": 5, "u_bound": 40, "collateral_mode": "concurrent",
               "demand_mode": "constant-elasticity", "elasticity_gamma": 0.7, "q_unit": 3},
    "initial": {"X": 2.5, "L": 80, "N": 200, "Nbar": 150},
    "return_model": {"kind": "empirical", "log_returns": [0.01, -0.02, 0.003], "bandwidth": 0.02},
    "schedule": [{"from_step": 5, "return_model": {"kind": "uniform", "lo": 0.9, "hi": 1.05}}],
    "run": {"horizon": 12, "paths": 7, "seed": 99, "m_levels": [1, 1.01], "epsilon": 0.05,
            "strict": true, "detector_every": 2, "detector_nodes": 4},
    "output": {"dir": "x", "plots": false},
    "report": {"regime_compare": {"nbar_ratio": 3, "draws": 500, "margin": 0.01}}
  })";
  const RunConfig a = parse_config(doc);
  const std::string text = serialize_config(a);
  const RunConfig b = parse_config(text);
  CHECK(serialize_config(b) == text);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(b.params.collateral_mode == CollateralMode::Concurrent);
  CHECK(b.params.u_bound == 40.0);
  CHECK(*b.initial.Nbar == 150.0);
  CHECK(std::get<EmpiricalKernel>(b.returns).log_returns.front() == -0.02);
  REQUIRE(b.schedule.size() == 1);
  CHECK(std::get<UniformInterval>(b.schedule[0].returns).hi == 1.05);
  CHECK(b.m_levels == std::vector<double>{1.0, 1.01});
  CHECK(b.regime_compare->draws == 500);
  CHECK_FALSE(b.write_plots);

  const RunConfig d = parse_config(serialize_config(parse_config("{}")));
  CHECK(std::isinf(d.params.u_bound));
  CHECK(config_hash(d) == config_hash(parse_config("{}")));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(d));
}

TEST_CASE("one path, one step") {
  RunConfig c = stable_config();
  c.n_paths = 1;
  c.horizon = 1;
  c.output_dir = scratch("single").string();
  const auto out = run(c, 1);
  CHECK(out.exit_code == 0);
  const std::string csv = slurp(fs::path(c.output_dir) / "trajectories.csv");
  int rows = 0;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++rows;
  }
  CHECK(rows == 2);
  CHECK(csv.find("# config_hash: " + config_hash(c)) == 0);
  CHECK(csv.find("# seed: 7\n") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "report.json"));
  CHECK(report["seed"] == 7);
  CHECK(report["n_paths"] == 1);
  fs::remove_all(c.output_dir);
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
  RunConfig c = stable_config();
  c.n_paths = 12;
  c.horizon = 8;
  c.regime_compare = RegimeCompareSpec{2.0, 200, 0.0};
  const auto a = scratch("det_a"), b = scratch("det_b");
  c.output_dir = a.string();
  run(c, 1);
  c.output_dir = b.string();
  run(c, 4);
  for (const char* f : {"trajectories.csv", "report.json", "plot_deviation.csv",
                        "plot_qv.csv", "plot_fan.csv"}) {
    CAPTURE(f);
    const auto x = slurp(a / f), y = slurp(b / f);
    CHECK(!x.empty());
    CHECK(x == y);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("replay verifies untouched artifacts and locates a tampered cell") {
  RunConfig c = stable_config();
  c.n_paths = 5;
  c.horizon = 20;
  c.returns = Lognormal{-0.01, 0.08};
  c.params.alpha = 1.05;
  const auto ens = run_ensemble(c, 1);
  const std::string csv = trajectories_csv(c, ens);
  const auto ok = replay(csv, c);
  CHECK(ok.ok);
  CHECK(ok.rows_checked == 5 * 21);

  for (int row : {0, 7, 60}) {
    CAPTURE(row);
    const auto bad = replay(perturb_z(csv, row, 1.0 + 1e-9), c);
    CHECK_FALSE(bad.ok);
    REQUIRE(bad.mismatch_row);
    CHECK(*bad.mismatch_row == row);
  }

  // Flags are recomputed too.
  std::string flipped = csv;
  const auto pos = flipped.find(",live,none,0,interior,0,0,");
  REQUIRE(pos != std::string::npos);
  flipped.replace(pos, 26, ",live,none,0,interior,0,1,");
  CHECK_FALSE(replay(flipped, c).ok);
}

TEST_CASE("rescaled run replays against the base Z column") {
  RunConfig base = stable_config();
  base.params.zeta = 10.0;
  base.params.alpha = 1.1;
  base.returns = Lognormal{0.0, 0.15};
  base.initial = {100.0, 90.0, 2.0, std::nullopt};
  base.horizon = 30;
  base.n_paths = 3;
  base.detector_every = 0;
  const std::string ref = trajectories_csv(base, run_ensemble(base, 1));
  for (double g : {0.02, 4.0, 300.0}) {
    CAPTURE(g);
    RunConfig c = base;
    c.params.demand_D *= g;
    c.params.zeta *= g;
    c.params.v_floor *= g;
    c.initial.L *= g;
    c.initial.N *= g;
    const std::string csv = trajectories_csv(c, run_ensemble(c, 1));
    const auto r = replay(csv, c, ref);
    CHECK(r.ok);
    CHECK(r.message.find("ok") == 0);
    CHECK_FALSE(replay(csv, c, perturb_z(ref, 40, 1.0 + 1e-6)).ok);
  }
}

TEST_CASE("stable-regime report carries the worked bounds and the frequencies") {
  RunConfig c = stable_config();
  const auto ens = run_ensemble(c);
  const Report rep = build_report(c, ens);
  const auto j = nlohmann::json::parse(rep.json);
  const auto& b = j["bounds"][0];
  CHECK(std::abs(b["doob_max_deviation"].get<double>() - 0.042) <= 0.0005);
  CHECK(std::abs(b["burkholder_qv"].get<double>() - 0.127) <= 0.0005);
  const auto& t = j["tail_reports"][0];
  CHECK(t["max_deviation"]["bound_name"] == "doob_max_deviation");
  CHECK(t["max_deviation"]["n_paths"].get<int>() == 100);
  CHECK(t["max_deviation"]["empirical"].is_number());
  CHECK(t["sqrt_qv"]["bound_name"] == "burkholder_qv");
  CHECK(j["assumptions"]["checks"].size() == 11);
  CHECK(j["initial_condition"]["holds"].get<int>() +
            j["initial_condition"]["fails"].get<int>() +
            j["initial_condition"]["unavailable"].get<int>() ==
        100);
}

TEST_CASE("strict mode turns a violated verdict into exit code 2") {
  // Bounds of zero (r = 1/kappa) cannot hold once the price moves.
  RunConfig c = stable_config();
  c.params.kappa = 1.0;
  c.params.r_bound = 1.0;
  c.returns = Lognormal{0.0, 0.2};
  c.epsilon = 1e-4;
  c.horizon = 5;
  c.write_trajectories = false;
  c.write_plots = false;
  c.output_dir = scratch("strict").string();
  CHECK(run(c, 1).exit_code == 0);
  c.strict = true;
  const auto out = run(c, 1);
  CHECK(out.any_violated);
  CHECK(out.exit_code == 2);
  fs::remove_all(c.output_dir);
}
