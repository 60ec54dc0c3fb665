#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stblsim/dynamics.hpp"
#include "stblsim/return_model.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

struct InitialConditions {
  double X = 1.0;
  double L = 100.0;
  double N = 300.0;
  /// Defaults to N.
  std::optional<double> Nbar;
};

struct ScheduleEntry {
  int from_step = 0;
  ReturnSpec returns;
};

struct RegimeCompareSpec {
  double nbar_ratio = 2.0;
  std::int64_t draws = 10000;
  double margin = 0.0;
};

struct RunConfig {
  SystemParams params;
  InitialConditions initial;
  ReturnSpec returns = Lognormal{0.0005, 0.04};
  std::vector<ScheduleEntry> schedule;

  int horizon = 100;
  std::int64_t n_paths = 100;
  std::uint64_t seed = 1;
  int detector_every = 1;
  int detector_nodes = 8;
  std::vector<double> m_levels{1.0};
  double epsilon = 0.1;
  bool strict = false;

  std::string output_dir = "out";
  bool write_trajectories = true;
  bool write_plots = true;
  std::optional<RegimeCompareSpec> regime_compare;

  /// Throws ModelError(Config) naming the offending key.
  void validate() const;

  ReturnSchedule schedule_models() const;
  SystemState initial_state() const;
  SimOptions sim_options() const;
};

/// Parses a JSON run configuration. Unknown keys, wrong types and invariant
/// violations throw ModelError(Config) with the key path in the message.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON text: every key present, fixed order, shortest doubles.
std::string serialize_config(const RunConfig& cfg);

/// 64-bit FNV-1a of the canonical serialization with the output directory
/// blanked, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace stblsim
