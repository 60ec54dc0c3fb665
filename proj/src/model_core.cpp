#include "stblsim/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace stblsim {

PriceCurve price_curve(double calL, const SystemParams& p) {
  switch (p.demand_mode) {
    case DemandMode::UnitElastic: {
      const double P = p.demand_D / calL;
      return {P, -P / calL, 2.0 * P / (calL * calL)};
    }
    case DemandMode::PerfectlyElastic:
      return {1.0, 0.0, 0.0};
    case DemandMode::ConstantElasticity: {
      const double e = 1.0 / p.elasticity_gamma;
      const double P = std::pow(p.q_unit / calL, e);
      return {P, -e * P / calL, e * (e + 1.0) * P / (calL * calL)};
    }
  }
  return {NAN, NAN, NAN};
}

double price(double calL, const SystemParams& p) {
  switch (p.demand_mode) {
    case DemandMode::UnitElastic: return p.demand_D / calL;
    case DemandMode::PerfectlyElastic: return 1.0;
    case DemandMode::ConstantElasticity:
      return std::pow(p.q_unit / calL, 1.0 / p.elasticity_gamma);
  }
  return NAN;
}

double clearing_price(double calL, const SystemParams& p) {
  if (!(calL >= p.v_floor))
    throw ModelError(ErrorKind::SupplyFloor,
                     "supply " + std::to_string(calL) + " below floor " +
                         std::to_string(p.v_floor));
  return price(calL, p);
}

double threshold_b(double L, double Nbar, double beta) {
  if (!(Nbar > 0.0))
    throw ModelError(ErrorKind::DegenerateCollateral,
                     "threshold_b: collateral must be positive");
  return beta * L / Nbar;
}

namespace {

struct ExhaustionEq {
  const SystemParams& p;
  double L;
  double a;  // 1/(beta-1)

  double ell(double y) const { return (p.beta * L - y) * a; }
  double supply(double y) const { return p.zeta + L - ell(y); }
  double operator()(double y) const {
    return p.alpha * ell(y) * price(supply(y), p) - y;
  }
};

double exhaustion_closed_form(double L, const SystemParams& p) {
  const double a = 1.0 / (p.beta - 1.0);
  if (p.demand_mode == DemandMode::PerfectlyElastic)
    return p.alpha * a * p.beta * L / (1.0 + p.alpha * a);
  // a y^2 + B y - C = 0, positive root
  const double aD = p.alpha * p.demand_D;
  const double B = p.zeta + L - a * p.beta * L + aD * a;
  const double C = aD * a * p.beta * L;
  const double disc = std::sqrt(B * B + 4.0 * a * C);
  if (B >= 0.0) return disc > 0.0 ? 2.0 * C / (B + disc) : 0.0;
  return (-B + disc) / (2.0 * a);
}

double exhaustion_numeric(double L, const SystemParams& p) {
  if (L <= 0.0) return 0.0;
  ExhaustionEq F{p, L, 1.0 / (p.beta - 1.0)};
  const double top = p.beta * L;
  // supply vanishes at y0; the repurchase price diverges there
  const double y0 = L - (p.beta - 1.0) * p.zeta;
  double lo = std::max(0.0, y0);
  if (y0 >= 0.0 && p.demand_mode != DemandMode::PerfectlyElastic)
    lo = y0 + 1e-13 * top;
  double flo = F(lo);
  if (!(flo > 0.0)) {
    // step inward until the sign is right; the price blows up near y0
    double step = 1e-13 * top;
    for (int i = 0; i < 60 && !(flo > 0.0) && lo < top; ++i) {
      step *= 2.0;
      lo = std::max(0.0, y0) + step;
      flo = F(lo);
    }
    if (!(flo > 0.0) && !(y0 < 0.0 && F(0.0) <= 0.0))
      throw ModelError(ErrorKind::ThresholdSolve,
                       "exhaustion equation has no sign change");
    if (!(flo > 0.0)) return 0.0;
  }
  const double fhi = F(top);
  if (fhi >= 0.0) return top;
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(48);
  auto r = boost::math::tools::toms748_solve(F, lo, top, flo, fhi, tol, iters);
  if (iters >= 200)
    throw ModelError(ErrorKind::ThresholdSolve,
                     "exhaustion root search did not converge");
  return 0.5 * (r.first + r.second);
}

}  // namespace

double threshold_c_numeric(double L, double Nbar, const SystemParams& p) {
  if (!(Nbar > 0.0))
    throw ModelError(ErrorKind::DegenerateCollateral,
                     "threshold_c: collateral must be positive");
  return exhaustion_numeric(L, p) / Nbar;
}

ExhaustionPoint exhaustion_point(double L, const SystemParams& p) {
  ExhaustionPoint e{0.0, 0.0, 0.0};
  if (L <= 0.0) return e;
  e.y = p.demand_mode == DemandMode::ConstantElasticity
            ? exhaustion_numeric(L, p)
            : exhaustion_closed_form(L, p);

  const double a = 1.0 / (p.beta - 1.0);
  const double ell = (p.beta * L - e.y) * a;
  const auto pc = price_curve(p.zeta + L - ell, p);
  const double al = p.alpha;
  const double ly = -a, sy = a, lL = p.beta * a, sL = -a;
  const double Fy = al * (ly * pc.P + ell * pc.dP * sy) - 1.0;
  const double FL = al * (lL * pc.P + ell * pc.dP * sL);
  const double Fyy = al * (2.0 * ly * pc.dP * sy + ell * pc.d2P * sy * sy);
  const double FyL = al * (ly * pc.dP * sL + lL * pc.dP * sy +
                           ell * pc.d2P * sy * sL);
  const double FLL = al * (2.0 * lL * pc.dP * sL + ell * pc.d2P * sL * sL);
  e.dy = -FL / Fy;
  e.d2y = -(FLL + 2.0 * FyL * e.dy + Fyy * e.dy * e.dy) / Fy;
  return e;
}

double threshold_c(double L, double Nbar, const SystemParams& p) {
  if (!(Nbar > 0.0))
    throw ModelError(ErrorKind::DegenerateCollateral,
                     "threshold_c: collateral must be positive");
  if (L <= 0.0) return 0.0;
  return exhaustion_point(L, p).y / Nbar;
}

Thresholds thresholds(double L, double Nbar, const SystemParams& p) {
  return {threshold_b(L, Nbar, p.beta), threshold_c(L, Nbar, p)};
}

double liquidation_amount(double L, double Nbar, double X, double beta) {
  const double y = Nbar * X;
  if (y > beta * L)
    throw ModelError(ErrorKind::Precondition,
                     "liquidation_amount: price is above the trigger");
  return (beta * L - y) / (beta - 1.0);
}

double liquidation_effect(double L, double y, const SystemParams& p) {
  const double ell = (p.beta * L - y) / (p.beta - 1.0);
  return ell * (1.0 - p.alpha * price(p.zeta + L - ell, p));
}

std::pair<SystemState, LiquidationOutcome> apply_liquidation(
    const SystemState& state, double X_next, const SystemParams& p) {
  if (state.frozen())
    throw ModelError(ErrorKind::Precondition,
                     "apply_liquidation: state is frozen");
  SystemState s = state;
  s.X = X_next;
  LiquidationOutcome out;

  const double y = s.Nbar * X_next;
  if (s.L <= 0.0 || y >= p.beta * s.L) {
    s.Y = s.N * X_next - s.L;
    return {s, out};
  }

  const double y_c = s.Nbar > 0.0 ? exhaustion_point(s.L, p).y : kInf;
  if (y < y_c) {
    out.kind = LiquidationKind::Wipeout;
    out.ell = s.L;
    out.collateral_cost = s.Nbar;
    s.N -= s.Nbar;
    s.Nbar = 0.0;
    s.L = 0.0;
    s.calL = p.zeta;
    s.Y = s.N * X_next;
    s.Z = p.zeta >= p.v_floor ? price(p.zeta, p) : NAN;
    s.wiped_out = true;
    return {s, out};
  }

  out.kind = LiquidationKind::Partial;
  out.ell = (p.beta * s.L - y) / (p.beta - 1.0);
  out.repurchase_price = p.alpha * price(s.calL - out.ell, p);
  out.collateral_cost = out.ell * out.repurchase_price / X_next;
  s.L -= out.ell;
  s.calL = p.zeta + s.L;
  s.Nbar = std::max(0.0, s.Nbar - out.collateral_cost);
  s.N -= out.collateral_cost;
  s.Y = s.N * X_next - s.L;
  return {s, out};
}

ElementaryBounds elementary_bounds(double alpha, double D, double L) {
  if (alpha < 0.0 || D < 0.0 || L < 0.0)
    throw ModelError(ErrorKind::Domain,
                     "elementary_bounds: inputs must be nonnegative");
  const double aD = alpha * D;
  return {aD + L, std::sqrt(aD * aD + 4.0 * aD * L + L * L),
          std::min(2.0 * aD + L, aD + L + std::sqrt(2.0 * aD * L))};
}

}  // namespace stblsim
