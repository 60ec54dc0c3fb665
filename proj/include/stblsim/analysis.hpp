#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stblsim/dynamics.hpp"
#include "stblsim/quadrature.hpp"
#include "stblsim/return_model.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

enum class StopCause { Horizon, Tau, Tm, S2, Frozen };
const char* to_string(StopCause c);

/// Which stopping times truncate a trajectory. `from_s1` restarts the
/// process at the first S1 (paths without one are excluded).
struct StopRule {
  bool at_tau = true;
  std::optional<double> at_tm;
  bool at_s2 = false;
  bool from_s1 = false;
};

StopRule stable_rule(double m);
StopRule deleveraging_rule();

struct StopPoint {
  int start = 0;
  int stop = 0;
  StopCause cause = StopCause::Horizon;
};

/// First index at which the rule stops the trajectory (the stopped process
/// keeps the value at that index). Empty when `from_s1` and no S1 occurs.
std::optional<StopPoint> stop_point(const Trajectory& tr, const StopRule& rule);

struct DeviationSeries {
  std::vector<double> z_prime;
  double m = 1.0;
  StopPoint stopped_at;
};

DeviationSeries deviation_series(const Trajectory& tr, double m,
                                 const StopPoint& at);

double max_process(const DeviationSeries& s);
double quadratic_variation(const DeviationSeries& s);
double max_process(const std::vector<double>& v);
double quadratic_variation(const std::vector<double>& v);

/// min(1, 2 (m - 1/(kappa r)) / epsilon), floored at 0.
double doob_deviation_bound(double epsilon, double m, double kappa, double r);
/// min(1, 6 (m - 1/(kappa r)) / epsilon), floored at 0.
double burkholder_qv_bound(double epsilon, double m, double kappa, double r);
/// 2 (m - 1/(kappa r)). `overshoot` is E[Z_stop - m | Z_stop > m]; throws
/// BoundInapplicable when no condition branch can be verified.
double expected_max_bound(double m, double kappa, double r,
                          std::optional<double> overshoot = std::nullopt);

enum class BoundVerdict { Consistent, Violated };
const char* to_string(BoundVerdict v);

struct BoundReport {
  std::string bound_name;
  double theoretical = NAN;
  double empirical = NAN;
  double ci_halfwidth = NAN;
  std::int64_t n_paths = 0;
  BoundVerdict verdict = BoundVerdict::Consistent;
};

/// Wilson score interval at 95% for k successes in n trials.
struct Interval {
  double lo;
  double hi;
};
Interval wilson_interval(std::int64_t k, std::int64_t n);

enum class TailStatistic { MaxDeviation, SqrtQV };

/// Frequency of {statistic > epsilon} over the stopped ensemble against the
/// matching theoretical bound. Needs at least 100 paths.
BoundReport empirical_tail_probability(const std::vector<Trajectory>& ensemble,
                                       TailStatistic stat, double epsilon,
                                       double m, const StopRule& rule);

/// Mean of Z_stop - m over paths whose stopped value exceeds m.
std::optional<double> estimate_overshoot(const std::vector<Trajectory>& ensemble,
                                         double m, const StopRule& rule);

/// Ensemble mean of the stopped maximum deviation with a 95% normal
/// half-width.
BoundReport expected_max_report(const std::vector<Trajectory>& ensemble,
                                double m, const StopRule& rule);

enum class Field { Z, calL, AbsDeviation };

/// Stopped values of a field from `start` onward, padded with the stopped
/// value to `length` entries.
std::vector<double> stopped_values(const Trajectory& tr, Field f, double m,
                                   const StopPoint& at, int length);

enum class Drift { Super, Sub };

struct DriftTest {
  std::vector<double> mean_increment;
  std::vector<double> std_error;
  int steps_tested = 0;
  int steps_consistent = 0;
  double fraction() const {
    return steps_tested ? double(steps_consistent) / steps_tested : 1.0;
  }
};

/// Step-wise test of the ensemble's mean increment: a step is consistent
/// with `dir` unless the mean is more than `bands` standard errors on the
/// wrong side of zero. Steps where every increment is zero are skipped.
DriftTest drift_test(const std::vector<std::vector<double>>& paths, Drift dir,
                     double bands = 3.0);

struct VarianceApproximation {
  double h_prime = 0.0;
  double e_calL = 0.0;
  double var_R = 0.0;
  /// (P'(calL) h')^2 Var(R).
  double delta_method = 0.0;
  /// D h'^2 Var(R) / calL^4, unit-elastic demand only.
  double as_written = NAN;
};

/// Taylor approximation of Var(Z_{t+1} | F_t) from the sensitivity of the
/// next decision to the return, evaluated at R = E[R].
VarianceApproximation variance_approximation(const SystemState& state,
                                             const ReturnModel& model,
                                             const SystemParams& params,
                                             const QuadratureSpec& spec = {});

struct RegimeVariance {
  double var_s = 0.0;
  double var_u = 0.0;
  /// Standard error of var_u - var_s under the paired draws.
  double se_diff = 0.0;
  std::int64_t n = 0;
};

/// One-step Monte Carlo variances of Z for two states that differ only in
/// their collateral (N and Nbar), using common return draws. Each state must
/// sit at least `margin` above its liquidation threshold b.
RegimeVariance regime_variance_compare(const SystemState& state_s,
                                       const SystemState& state_u,
                                       const ReturnModel& model,
                                       const SystemParams& params,
                                       std::int64_t n_paths, std::uint64_t seed,
                                       double margin = 0.0);

}  // namespace stblsim
