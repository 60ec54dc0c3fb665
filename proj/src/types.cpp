#include "stblsim/types.hpp"

namespace stblsim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::SupplyFloor: return "supply-floor";
    case ErrorKind::DegenerateCollateral: return "degenerate-collateral";
    case ErrorKind::ThresholdSolve: return "threshold-solve";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::IntegrationAccuracy: return "integration-accuracy";
    case ErrorKind::Insolvency: return "insolvency";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::ConcavityViolation: return "concavity-violation";
    case ErrorKind::SensitivityUndefined: return "sensitivity-undefined";
    case ErrorKind::BoundInapplicable: return "bound-inapplicable";
    case ErrorKind::RegimeCompare: return "regime-compare";
    case ErrorKind::DetectorUnavailable: return "detector-unavailable";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

const char* to_string(LiquidationKind kind) {
  switch (kind) {
    case LiquidationKind::None: return "none";
    case LiquidationKind::Partial: return "partial";
    case LiquidationKind::Wipeout: return "wipeout";
  }
  return "unknown";
}

namespace {
void require(bool ok, const char* field, const char* constraint) {
  if (!ok)
    throw ModelError(ErrorKind::Config,
                     std::string(field) + ": must satisfy " + constraint);
}
}  // namespace

void SystemParams::validate() const {
  require(beta > 1.0, "beta", "beta > 1");
  require(alpha >= 1.0, "alpha", "alpha >= 1");
  require(zeta >= 0.0, "zeta", "zeta >= 0");
  require(kappa >= 1.0, "kappa", "kappa >= 1");
  require(v_floor > 0.0, "v_floor", "v_floor > 0");
  require(elasticity_gamma > 0.0, "elasticity_gamma", "elasticity_gamma > 0");
  require(demand_D >= 0.0, "demand_D", "demand_D >= 0");
  require(r_bound > 0.0, "r_bound", "r_bound > 0");
  require(gamma_marginal > 0.0, "gamma_marginal", "gamma_marginal > 0");
  if (demand_mode == DemandMode::UnitElastic)
    require(elasticity_gamma == 1.0, "elasticity_gamma",
            "elasticity_gamma = 1 in unit-elastic mode");
  if (demand_mode == DemandMode::ConstantElasticity)
    require(q_unit > 0.0, "q_unit", "q_unit > 0");
  if (speculator_mode == SpeculatorMode::UnlimitedDepth)
    require(demand_mode == DemandMode::UnitElastic, "speculator_mode",
            "unlimited depth requires unit-elastic demand");
}

}  // namespace stblsim
