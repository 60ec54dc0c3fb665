#pragma once

#include <utility>

#include "stblsim/types.hpp"

namespace stblsim {

/// Market-clearing price for total supply calL. Throws SupplyFloor below
/// params.v_floor.
double clearing_price(double calL, const SystemParams& params);

/// Clearing price and its first two derivatives in calL, without the floor
/// check. Used inside integrands where the supply is already known valid.
struct PriceCurve {
  double P;
  double dP;
  double d2P;
};
PriceCurve price_curve(double calL, const SystemParams& params);
double price(double calL, const SystemParams& params);

double threshold_b(double L, double Nbar, double beta);

/// Collateral-exhaustion price: below it a liquidation consumes all of Nbar.
double threshold_c(double L, double Nbar, const SystemParams& params);

/// Same threshold by bracketed root search on the exhaustion equation; used
/// for general demand curves and as a cross-check of the closed forms.
double threshold_c_numeric(double L, double Nbar, const SystemParams& params);

Thresholds thresholds(double L, double Nbar, const SystemParams& params);

/// Exhaustion point expressed as a collateral value y_c = Nbar * c, with its
/// first and second derivatives with respect to L. Depends only on L.
struct ExhaustionPoint {
  double y;
  double dy;
  double d2y;
};
ExhaustionPoint exhaustion_point(double L, const SystemParams& params);

double liquidation_amount(double L, double Nbar, double X, double beta);

/// Signed value effect of a partial liquidation at collateral value y:
/// ell * (1 - alpha * P(calL - ell)). Negative when the fee-inclusive
/// repurchase price exceeds 1.
double liquidation_effect(double L, double y, const SystemParams& params);

/// Liquidation at the new ETH price. Returns the post-liquidation state
/// (position N and collateral Nbar both reduced by the ETH cost) with X and Y
/// updated, and the outcome record. The state's Z is left for the decision.
std::pair<SystemState, LiquidationOutcome> apply_liquidation(
    const SystemState& state, double X_next, const SystemParams& params);

struct ElementaryBounds {
  double lower;
  double mid;
  double upper;
};
ElementaryBounds elementary_bounds(double alpha, double D, double L);

}  // namespace stblsim
