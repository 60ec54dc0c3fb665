#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stblsim {

enum class DemandMode { UnitElastic, PerfectlyElastic, ConstantElasticity };
enum class SpeculatorMode { Single, UnlimitedDepth };
enum class CollateralMode { Lagged, Concurrent };

/// Everything that can go wrong inside the model, tagged so callers can
/// turn a failure into a trajectory event instead of an abort.
enum class ErrorKind {
  Domain,
  SupplyFloor,
  DegenerateCollateral,
  ThresholdSolve,
  Precondition,
  IntegrationAccuracy,
  Insolvency,
  Solver,
  ConcavityViolation,
  SensitivityUndefined,
  BoundInapplicable,
  RegimeCompare,
  DetectorUnavailable,
  Config,
};

const char* to_string(ErrorKind kind);

class ModelError : public std::runtime_error {
 public:
  ModelError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Model constants. Units: D in dollars, zeta/q/v in stablecoin units,
/// u in dollars per ETH, everything else dimensionless.
struct SystemParams {
  double demand_D = 100.0;
  double beta = 1.5;
  double alpha = 1.0;
  double zeta = 0.0;
  double kappa = 1.0;
  double r_bound = 1.0;
  double u_bound = std::numeric_limits<double>::infinity();
  double v_floor = 1e-9;
  double elasticity_gamma = 1.0;
  double q_unit = 100.0;
  DemandMode demand_mode = DemandMode::UnitElastic;
  SpeculatorMode speculator_mode = SpeculatorMode::Single;
  CollateralMode collateral_mode = CollateralMode::Lagged;
  double gamma_marginal = 1.0;

  /// Throws ModelError(Config) naming the offending field.
  void validate() const;
};

/// One time slice. L is the speculator's liability, calL = zeta + L the total
/// supply, N the speculator's ETH position and Nbar the collateral at stake
/// for the next step.
struct SystemState {
  int t = 0;
  double X = 1.0;
  double L = 0.0;
  double calL = 0.0;
  double N = 0.0;
  double Nbar = 0.0;
  double Z = 1.0;
  double Y = 0.0;
  bool wiped_out = false;
  /// Insolvency or supply-floor exit; the state is frozen like a wipeout.
  bool halted = false;

  bool frozen() const { return wiped_out || halted; }
};

struct Thresholds {
  double b = 0.0;
  double c = 0.0;
};

enum class LiquidationKind { None, Partial, Wipeout };

const char* to_string(LiquidationKind kind);

struct LiquidationOutcome {
  double ell = 0.0;
  double repurchase_price = 0.0;
  double collateral_cost = 0.0;
  LiquidationKind kind = LiquidationKind::None;
};

struct EventProbabilities {
  double p_A = 1.0;
  double p_B = 0.0;
  double p_wipe = 0.0;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace stblsim
