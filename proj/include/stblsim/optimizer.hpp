#pragma once

#include "stblsim/quadrature.hpp"
#include "stblsim/return_model.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

/// What the speculator knows when choosing L at time t. L_prev and N_prev
/// are the liabilities and ETH position after any liquidation at t; the
/// whole position is collateral for the next step.
struct DecisionContext {
  double L_prev = 0.0;
  double N_prev = 0.0;
  double X = 1.0;
  /// Upper bound on L imposed by a liquidation at t (delta <= -ell).
  double forced_cap = kInf;
};

DecisionContext decision_context(const SystemState& s);

enum class Binding { Interior, CollateralCap, ForcedLiquidationCap, LowerBound };
const char* to_string(Binding b);

struct DecisionResult {
  double L_star = 0.0;
  double delta = 0.0;
  Binding binding = Binding::Interior;
  double psi_at_star = NAN;
  double foc_residual = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  /// Set when the local candidate was not in a concave stretch of psi and a
  /// global grid-plus-Brent search on psi was used instead.
  bool fallback = false;
};

struct SolveOptions {
  bool evaluate_psi = true;
  bool check_concavity = true;
  /// Relative x-tolerance of the FOC root search.
  double root_rel_tol = 1e-13;
};

/// Expected next-period equity psi(L) = E[Y_{t+1} | F_t] and derivatives.
double psi(double L, const DecisionContext& ctx, const ReturnModel& model,
           const SystemParams& params, const QuadratureSpec& spec = {});
double psi_prime(double L, const DecisionContext& ctx, const ReturnModel& model,
                 const SystemParams& params, const QuadratureSpec& spec = {});
double psi_second(double L, const DecisionContext& ctx,
                  const ReturnModel& model, const SystemParams& params,
                  const QuadratureSpec& spec = {});

double psi(double L, const SystemState& s, const ReturnModel& model,
           const SystemParams& params);
double psi_prime(double L, const SystemState& s, const ReturnModel& model,
                 const SystemParams& params);
double psi_second(double L, const SystemState& s, const ReturnModel& model,
                  const SystemParams& params);

/// Like psi_second, but throws ConcavityViolation above `tol`.
double psi_second_checked(double L, const DecisionContext& ctx,
                          const ReturnModel& model, const SystemParams& params,
                          double tol = 1e-9, const QuadratureSpec& spec = {});

/// Cross partial of psi' with respect to the collateral value N_prev * X.
double psi_prime_dK(double L, const DecisionContext& ctx,
                    const ReturnModel& model, const SystemParams& params,
                    const QuadratureSpec& spec = {});

/// Largest feasible L from the post-decision collateral constraint.
double collateral_cap(const DecisionContext& ctx, const ReturnModel& model,
                      const SystemParams& params);

/// Lowest delta the speculator's balance sheet can fund. Throws Insolvency
/// when no real solution exists.
double delta_lower_bound(const DecisionContext& ctx, const SystemParams& params);
double delta_lower_bound(const SystemState& s, const SystemParams& params);

struct UpperBound {
  double calL_bound = kInf;
  double L_bound = kInf;
  bool integral_condition = false;
  bool probability_condition = false;
  double liquidation_integral = 0.0;
  double p_survive = 1.0;
  double p_A_minus_2p_B = 1.0;
};

/// Supply ceiling sqrt(kappa * calL_prev * D * E[R]) with the two sufficient
/// conditions evaluated at the ceiling (or at the collateral cap if lower).
/// Throws BoundInapplicable when neither holds or demand is not unit elastic.
UpperBound supply_upper_bound(const DecisionContext& ctx,
                              const ReturnModel& model,
                              const SystemParams& params,
                              const QuadratureSpec& spec = {});

DecisionResult solve_supply(const DecisionContext& ctx, const ReturnModel& model,
                            const SystemParams& params,
                            const QuadratureSpec& spec = {},
                            const SolveOptions& opts = {});
DecisionResult solve_supply(const SystemState& s, const ReturnModel& model,
                            const SystemParams& params);

struct SensitivityPair {
  double dh_drho = 0.0;
  double dh_dn = 0.0;
  double L_star = 0.0;
};

/// Implicit-function sensitivities of the optimal supply to a multiplicative
/// shock rho on the current ETH price and to the collateral amount n.
/// Throws SensitivityUndefined if the optimum binds or psi'' >= 0.
SensitivityPair h_sensitivities(const DecisionContext& ctx,
                                const ReturnModel& model,
                                const SystemParams& params,
                                const QuadratureSpec& spec = {});

}  // namespace stblsim
