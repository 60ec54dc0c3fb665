#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stblsim/config.hpp"
#include "stblsim/dynamics.hpp"

namespace stblsim {

/// Simulates every path of the configured ensemble. Path i uses
/// path_stream(seed, i); results are ordered by path index whatever the
/// thread count (0 picks the hardware concurrency).
std::vector<Trajectory> run_ensemble(const RunConfig& cfg, unsigned threads = 0);

/// One row per (path, step) preceded by a '#' comment block with the config
/// hash and seed. Doubles are written in shortest round-trip form.
std::string trajectories_csv(const RunConfig& cfg,
                             const std::vector<Trajectory>& ensemble);

struct Report {
  std::string json;
  bool any_violated = false;
};

Report build_report(const RunConfig& cfg, const std::vector<Trajectory>& ensemble);

/// Theoretical bounds for every configured m level, as JSON.
std::string bounds_json(const RunConfig& cfg);

/// Assumption checks at the configured initial state, as JSON.
std::string assumptions_json(const RunConfig& cfg);

struct PlotSeries {
  std::string deviation;
  std::string qv;
  std::string fan;
};

/// Stopped |m - Z| and running quadratic variation per path for the first m
/// level, and Z quantiles across paths per step.
PlotSeries plot_series(const RunConfig& cfg, const std::vector<Trajectory>& ensemble);

struct RunOutcome {
  int exit_code = 0;
  bool any_violated = false;
  std::vector<std::string> written;
};

/// Runs the ensemble and writes trajectories.csv, report.json and the plot
/// CSVs into cfg.output_dir. Exit code 2 when strict and a verdict is
/// Violated.
RunOutcome run(const RunConfig& cfg, unsigned threads = 0);

struct ReplayResult {
  bool ok = true;
  std::int64_t rows_checked = 0;
  /// Data row index (0-based, comments and header excluded).
  std::optional<std::int64_t> mismatch_row;
  std::string message;
};

/// Recomputes clearing, liquidation and balance-sheet identities and the
/// stop flags from the raw columns. With `reference`, also requires the Z
/// column to match it to 1e-8 relative row by row.
ReplayResult replay(const std::string& trajectories, const RunConfig& cfg,
                    const std::optional<std::string>& reference = std::nullopt);

}  // namespace stblsim
