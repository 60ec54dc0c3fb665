#include "stblsim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "stblsim/model_core.hpp"

namespace stblsim {

const char* to_string(Binding b) {
  switch (b) {
    case Binding::Interior: return "interior";
    case Binding::CollateralCap: return "collateral-cap";
    case Binding::ForcedLiquidationCap: return "forced-liquidation-cap";
    case Binding::LowerBound: return "lower-bound";
  }
  return "unknown";
}

DecisionContext decision_context(const SystemState& s) {
  DecisionContext c;
  c.L_prev = s.L;
  c.N_prev = s.N;
  c.X = s.X;
  return c;
}

namespace {

// Liquidation algebra at fixed L as a function of collateral value y.
struct Liq {
  const SystemParams& p;
  double L;
  double a;

  double ell(double y) const { return (p.beta * L - y) * a; }
  double supply(double y) const { return p.zeta + L - ell(y); }
  double E(double y) const {
    const double l = ell(y);
    return l * (1.0 - p.alpha * price(p.zeta + L - l, p));
  }
  double E_L(double y) const {
    const double l = ell(y);
    const auto pc = price_curve(p.zeta + L - l, p);
    return p.beta * a * (1.0 - p.alpha * pc.P) + l * p.alpha * pc.dP * a;
  }
  double E_LL(double y) const {
    const double l = ell(y);
    const auto pc = price_curve(p.zeta + L - l, p);
    return 2.0 * p.beta * a * a * p.alpha * pc.dP - l * p.alpha * pc.d2P * a * a;
  }
};

// Quantities shared by psi and its derivatives at one L.
struct Point {
  double L, K, calL;
  PriceCurve pc;
  ExhaustionPoint ep;
  double zc, zb;
  double J;   // jump of the equity integrand at the exhaustion point
  double dJ;  // its L-derivative
};

class Objective {
 public:
  Objective(const DecisionContext& ctx, const ReturnModel& model,
            const SystemParams& p, const QuadratureSpec& spec)
      : ctx_(ctx), model_(model), p_(p), spec_(spec),
        m_(model.mean()), K0_(ctx.N_prev * ctx.X),
        a_(1.0 / (p.beta - 1.0)),
        concurrent_(p.collateral_mode == CollateralMode::Concurrent) {}

  double K_of(double L, const PriceCurve& pc) const {
    if (!concurrent_) return K0_;
    return K0_ + (L - ctx_.L_prev) * pc.P;
  }
  double dK_of(double L, const PriceCurve& pc) const {
    if (!concurrent_) return 0.0;
    return pc.P + (L - ctx_.L_prev) * pc.dP;
  }

  Point at(double L, double K) const {
    Point q;
    q.L = L;
    q.calL = p_.zeta + L;
    q.pc = price_curve(q.calL, p_);
    q.K = K;
    q.ep = exhaustion_point(L, p_);
    if (K > 0.0) {
      q.zc = q.ep.y / K;
      q.zb = p_.beta * L / K;
    } else {
      q.zc = q.zb = kInf;
    }
    q.J = (L - q.ep.y) * a_;
    q.dJ = (1.0 - q.ep.dy) * a_;
    return q;
  }
  Point at(double L) const {
    const auto pc = price_curve(p_.zeta + L, p_);
    return at(L, K_of(L, pc));
  }

  template <class F>
  double liq_integral(const Point& q, F f) const {
    if (!(q.zb > q.zc) || !std::isfinite(q.zb)) return 0.0;
    return expect(model_, f, q.zc, q.zb, spec_);
  }

  // Same range, but f already carries any density factor.
  template <class F>
  double liq_integral_raw(const Point& q, F f) const {
    if (!(q.zb > q.zc) || !std::isfinite(q.zb) || model_.point_mass())
      return 0.0;
    const auto [lo, hi] = model_.effective_support(spec_.tail_mass);
    const double a = std::max(q.zc, lo), b = std::min(q.zb, hi);
    if (!(b > a)) return 0.0;
    return integrate(f, a, b, spec_);
  }

  double value(double L) const {
    const Point q = at(L);
    const Liq lq{p_, L, a_};
    double v = 0.0;
    if (!concurrent_) v += (L - ctx_.L_prev) * q.pc.P * m_;
    if (std::isfinite(q.zc))
      v += q.K * model_.upper_moment(q.zc) - L * model_.tail(q.zc);
    v += liq_integral(q, [&](double z) { return lq.E(q.K * z); });
    return v;
  }

  // psi' holding the collateral value K fixed
  double d1_fixedK(const Point& q) const {
    const Liq lq{p_, q.L, a_};
    double v = 0.0;
    if (std::isfinite(q.zc)) {
      const double zc1 = q.ep.dy / q.K;
      v += -q.J * model_.pdf(q.zc) * zc1 - model_.tail(q.zc);
    }
    v += liq_integral(q, [&](double z) { return lq.E_L(q.K * z); });
    return v;
  }

  // d/dK of psi at fixed L
  double dK_psi(const Point& q) const {
    if (!std::isfinite(q.zc)) return 0.0;
    const Liq lq{p_, q.L, a_};
    const double g = model_.pdf(q.zc);
    double v = model_.upper_moment(q.zc) + g * q.zc * (q.ep.y - q.L) / q.K;
    v -= liq_integral_raw(q, [&](double z) {
           return lq.E(q.K * z) * (z * model_.pdf_derivative(z) +
                                   model_.pdf(z));
         }) / q.K;
    return v;
  }

  double d1(double L) const {
    const Point q = at(L);
    if (!concurrent_) {
      const double T1 = m_ * (q.pc.P + (L - ctx_.L_prev) * q.pc.dP);
      return T1 + d1_fixedK(q);
    }
    return d1_fixedK(q) + dK_psi(q) * dK_of(L, q.pc);
  }

  double d1_with_K0(double L, double K0) const {
    Objective o = *this;
    o.K0_ = K0;
    return o.d1(L);
  }

  double d2(double L) const {
    if (concurrent_) {
      const double h = 1e-4 * std::max(std::abs(L), 1e-6);
      return (d1(L + h) - d1(L - h)) / (2.0 * h);
    }
    const Point q = at(L);
    const Liq lq{p_, L, a_};
    double v = m_ * (2.0 * q.pc.dP + (L - ctx_.L_prev) * q.pc.d2P);
    if (std::isfinite(q.zc)) {
      const double zc1 = q.ep.dy / q.K, zc2 = q.ep.d2y / q.K;
      const double zb1 = p_.beta / q.K;
      const double gc = model_.pdf(q.zc), gc1 = model_.pdf_derivative(q.zc);
      v -= q.dJ * gc * zc1 + q.J * gc1 * zc1 * zc1 + q.J * gc * zc2;
      v += gc * zc1;
      if (q.zb > q.zc) {
        v += lq.E_L(q.K * q.zb) * model_.pdf(q.zb) * zb1;
        v -= lq.E_L(q.K * q.zc) * gc * zc1;
      }
    }
    v += liq_integral(q, [&](double z) { return lq.E_LL(q.K * z); });
    return v;
  }

  double dK_of_d1(double L) const {
    if (concurrent_) {
      const double h = 1e-6 * std::max(K0_, 1e-9);
      return (d1_with_K0(L, K0_ + h) - d1_with_K0(L, K0_ - h)) / (2.0 * h);
    }
    const Point q = at(L);
    if (!std::isfinite(q.zc)) return 0.0;
    const Liq lq{p_, L, a_};
    const double g = model_.pdf(q.zc), g1 = model_.pdf_derivative(q.zc);
    double v = q.J * q.ep.dy * (g1 * q.zc + g) / (q.K * q.K) - g * q.zc / q.K;
    v -= liq_integral_raw(q, [&](double z) {
           return lq.E_L(q.K * z) *
                  (z * model_.pdf_derivative(z) + model_.pdf(z));
         }) / q.K;
    return v;
  }

  // Feasible L from the post-decision collateral constraint. In concurrent
  // mode the issuance proceeds count as collateral, so the set is an
  // interval [first, second]; an empty set comes back with first > second.
  std::pair<double, double> feasible() const {
    const double floor_L = std::max(0.0, p_.v_floor - p_.zeta);
    if (!concurrent_) return {floor_L, K0_ / p_.beta};
    auto f = [&](double L) {
      return K_of(L, price_curve(p_.zeta + L, p_)) - p_.beta * L;
    };
    double inside = std::max(floor_L, ctx_.L_prev);
    if (f(inside) < 0.0) {
      auto neg = [&](double L) { return -f(L); };
      std::uintmax_t it = 200;
      const double top = std::max(inside, K0_ / p_.beta + ctx_.L_prev) + 1.0;
      inside = boost::math::tools::brent_find_minima(neg, floor_L, top, 50, it)
                   .first;
      if (f(inside) < 0.0) return {1.0, 0.0};
    }
    auto tol = boost::math::tools::eps_tolerance<double>(50);
    double lo = floor_L;
    if (f(lo) < 0.0) {
      std::uintmax_t it = 200;
      lo = boost::math::tools::toms748_solve(f, lo, inside, tol, it).second;
    }
    double a = inside, b = std::max(2.0 * inside, K0_ / p_.beta + 1.0);
    for (int i = 0; i < 200 && f(b) >= 0.0; ++i) {
      a = b;
      b *= 2.0;
    }
    std::uintmax_t it = 200;
    const double hi = boost::math::tools::toms748_solve(f, a, b, tol, it).first;
    return {lo, hi};
  }
  double cap() const { return feasible().second; }

  double mean() const { return m_; }

 private:
  DecisionContext ctx_;
  const ReturnModel& model_;
  const SystemParams& p_;
  QuadratureSpec spec_;
  double m_;
  double K0_;
  double a_;
  bool concurrent_;
};

}  // namespace

double psi(double L, const DecisionContext& ctx, const ReturnModel& model,
           const SystemParams& params, const QuadratureSpec& spec) {
  return Objective(ctx, model, params, spec).value(L);
}

double psi_prime(double L, const DecisionContext& ctx, const ReturnModel& model,
                 const SystemParams& params, const QuadratureSpec& spec) {
  return Objective(ctx, model, params, spec).d1(L);
}

double psi_second(double L, const DecisionContext& ctx,
                  const ReturnModel& model, const SystemParams& params,
                  const QuadratureSpec& spec) {
  return Objective(ctx, model, params, spec).d2(L);
}

double psi(double L, const SystemState& s, const ReturnModel& model,
           const SystemParams& params) {
  return psi(L, decision_context(s), model, params);
}
double psi_prime(double L, const SystemState& s, const ReturnModel& model,
                 const SystemParams& params) {
  return psi_prime(L, decision_context(s), model, params);
}
double psi_second(double L, const SystemState& s, const ReturnModel& model,
                  const SystemParams& params) {
  return psi_second(L, decision_context(s), model, params);
}

double psi_second_checked(double L, const DecisionContext& ctx,
                          const ReturnModel& model, const SystemParams& params,
                          double tol, const QuadratureSpec& spec) {
  const double v = psi_second(L, ctx, model, params, spec);
  if (v > tol)
    throw ModelError(ErrorKind::ConcavityViolation,
                     "psi'' = " + std::to_string(v) + " is positive");
  return v;
}

double psi_prime_dK(double L, const DecisionContext& ctx,
                    const ReturnModel& model, const SystemParams& params,
                    const QuadratureSpec& spec) {
  return Objective(ctx, model, params, spec).dK_of_d1(L);
}

double collateral_cap(const DecisionContext& ctx, const ReturnModel& model,
                      const SystemParams& params) {
  return Objective(ctx, model, params, {}).cap();
}

double delta_lower_bound(const DecisionContext& ctx, const SystemParams& p) {
  const double E = ctx.N_prev * ctx.X - ctx.L_prev;
  const double C = p.zeta + ctx.L_prev;
  switch (p.demand_mode) {
    case DemandMode::UnitElastic: {
      const double k = p.demand_D + E - C;
      const double disc = k * k + 4.0 * E * C;
      if (disc < 0.0)
        throw ModelError(ErrorKind::Insolvency,
                         "repurchase balance equation has no real solution");
      return 0.5 * (k - std::sqrt(disc));
    }
    case DemandMode::PerfectlyElastic:
      if (E < 0.0)
        throw ModelError(ErrorKind::Insolvency, "negative equity at par");
      return -ctx.L_prev;
    case DemandMode::ConstantElasticity: {
      // lowest root of delta (P(C + delta) - 1) + E = 0 on (-C, inf)
      auto f = [&](double d) { return d * (price(C + d, p) - 1.0) + E; };
      std::uintmax_t it = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(50);
      if (E >= 0.0) {
        if (E == 0.0) return 0.0;
        double lo = -C * (1.0 - 1e-12);
        for (int i = 0; i < 60 && f(lo) >= 0.0; ++i) lo = -C + (lo + C) * 0.5;
        if (f(lo) >= 0.0) return -C;
        auto r = boost::math::tools::toms748_solve(f, lo, 0.0, tol, it);
        return r.first;
      }
      // negative equity: issuance at a price above 1 may cover it
      auto neg = [&](double d) { return -f(d); };
      const double top = std::max(0.0, p.q_unit - C);
      if (top <= 0.0)
        throw ModelError(ErrorKind::Insolvency,
                         "repurchase balance equation has no real solution");
      std::uintmax_t mit = 200;
      auto best = boost::math::tools::brent_find_minima(neg, 0.0, top, 50, mit);
      if (f(best.first) < 0.0)
        throw ModelError(ErrorKind::Insolvency,
                         "repurchase balance equation has no real solution");
      auto r = boost::math::tools::toms748_solve(f, 0.0, best.first, tol, it);
      return r.first;
    }
  }
  return NAN;
}

double delta_lower_bound(const SystemState& s, const SystemParams& p) {
  return delta_lower_bound(decision_context(s), p);
}

UpperBound supply_upper_bound(const DecisionContext& ctx,
                              const ReturnModel& model,
                              const SystemParams& p,
                              const QuadratureSpec& spec) {
  if (p.demand_mode != DemandMode::UnitElastic)
    throw ModelError(ErrorKind::BoundInapplicable,
                     "supply ceiling is defined for unit-elastic demand");
  UpperBound ub;
  const double calL_prev = p.zeta + ctx.L_prev;
  ub.calL_bound = std::sqrt(p.kappa * calL_prev * p.demand_D * model.mean());
  ub.L_bound = ub.calL_bound - p.zeta;

  Objective obj(ctx, model, p, spec);
  const double L = std::max(std::min(ub.L_bound, obj.cap()), 0.0);
  const double K = ctx.N_prev * ctx.X;
  if (K > 0.0 && L > 0.0) {
    const Thresholds th = thresholds(L, ctx.N_prev, p);
    const auto ev = event_probabilities(model, ctx.X, th);
    const double a = 1.0 / (p.beta - 1.0);
    const Liq lq{p, L, a};
    ub.liquidation_integral =
        expect(model, [&](double z) { return lq.E_L(K * z); }, th.c / ctx.X,
               th.b / ctx.X, spec);
    ub.p_survive = ev.p_A + ev.p_B;
    ub.p_A_minus_2p_B = ev.p_A - 2.0 * ev.p_B;
  }
  const double kinv = 1.0 / p.kappa;
  ub.integral_condition =
      ub.liquidation_integral <= 0.0 && ub.p_survive >= kinv;
  ub.probability_condition =
      ub.p_A_minus_2p_B <= 1.0 && ub.p_A_minus_2p_B >= kinv;
  if (!ub.integral_condition && !ub.probability_condition)
    throw ModelError(ErrorKind::BoundInapplicable,
                     "neither sufficient condition for the supply ceiling holds");
  return ub;
}

DecisionResult solve_supply(const DecisionContext& ctx, const ReturnModel& model,
                            const SystemParams& p, const QuadratureSpec& spec,
                            const SolveOptions& opts) {
  Objective obj(ctx, model, p, spec);
  DecisionResult r;
  const auto range = obj.feasible();
  double lo = std::max(range.first, ctx.L_prev + delta_lower_bound(ctx, p));
  const double cap = range.second;
  double hi = std::min(cap, ctx.forced_cap);
  const Binding hi_kind = ctx.forced_cap < cap ? Binding::ForcedLiquidationCap
                                               : Binding::CollateralCap;
  if (hi < lo)
    throw ModelError(ErrorKind::Insolvency,
                     "no feasible supply: lower bound " + std::to_string(lo) +
                         " exceeds cap " + std::to_string(hi));
  r.lower = lo;
  r.upper = hi;

  auto finish = [&](double L, Binding b) {
    r.L_star = L;
    r.binding = b;
    r.delta = L - ctx.L_prev;
    if (opts.evaluate_psi) r.psi_at_star = obj.value(L);
    return r;
  };

  if (p.speculator_mode == SpeculatorMode::UnlimitedDepth) {
    const double calL = std::sqrt(p.gamma_marginal * p.demand_D *
                                  (p.zeta + ctx.L_prev) * obj.mean());
    const double L = calL - p.zeta;
    if (L <= lo) return finish(lo, Binding::LowerBound);
    if (L >= hi) return finish(hi, hi_kind);
    return finish(L, Binding::Interior);
  }

  // Global search on psi for when the local answer sits where psi is not
  // concave: grid, then Brent between the neighbours of the best point.
  auto global = [&]() {
    const int n = 64;
    int best_i = 0;
    double best_v = -kInf;
    for (int i = 0; i <= n; ++i) {
      const double v = obj.value(lo + (hi - lo) * i / n);
      if (v > best_v) best_v = v, best_i = i;
    }
    r.fallback = true;
    if (best_i == 0) return finish(lo, Binding::LowerBound);
    if (best_i == n) return finish(hi, hi_kind);
    const double a = lo + (hi - lo) * (best_i - 1) / n;
    const double b = lo + (hi - lo) * (best_i + 1) / n;
    const double fa = obj.d1(a), fb = obj.d1(b);
    double L;
    if (fa > 0.0 && fb < 0.0) {
      std::uintmax_t it = 200;
      const auto root = boost::math::tools::toms748_solve(
          [&](double x) { return obj.d1(x); }, a, b, fa, fb,
          boost::math::tools::eps_tolerance<double>(52), it);
      L = 0.5 * (root.first + root.second);
    } else {
      auto neg = [&](double x) { return -obj.value(x); };
      std::uintmax_t mit = 500;
      L = boost::math::tools::brent_find_minima(neg, a, b, 52, mit).first;
    }
    r.foc_residual = obj.d1(L);
    return finish(L, Binding::Interior);
  };
  auto concave_at = [&](double L) {
    return !opts.check_concavity || obj.d2(L) <= 1e-9;
  };
  // Where alpha P(calL) <= 1 a liquidation can be worth more than it costs,
  // and psi may have a convex stretch below the cap that a local test at the
  // candidate cannot see.
  const bool profitable_liquidation =
      opts.check_concavity && p.alpha * price(p.zeta + hi, p) <= 1.0;

  auto f = [&](double L) { return obj.d1(L); };
  const double f_lo = f(lo);
  if (f_lo <= 0.0) {
    r.foc_residual = f_lo;
    if (profitable_liquidation || !concave_at(lo)) return global();
    return finish(lo, Binding::LowerBound);
  }
  const double f_hi = f(hi);
  if (f_hi >= 0.0) {
    r.foc_residual = f_hi;
    if (profitable_liquidation || !concave_at(hi)) return global();
    return finish(hi, hi_kind);
  }
  const int bits = std::clamp(
      static_cast<int>(std::ceil(-std::log2(opts.root_rel_tol))), 8, 52);
  std::uintmax_t iters = 200;
  auto root = boost::math::tools::toms748_solve(
      f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(bits),
      iters);
  if (iters >= 200)
    throw ModelError(ErrorKind::Solver, "FOC root search did not converge");
  const double L = 0.5 * (root.first + root.second);
  r.foc_residual = f(L);
  if (!concave_at(L)) return global();
  if (profitable_liquidation && obj.value(hi) > obj.value(L)) return global();
  return finish(L, Binding::Interior);
}

DecisionResult solve_supply(const SystemState& s, const ReturnModel& model,
                            const SystemParams& params) {
  return solve_supply(decision_context(s), model, params);
}

SensitivityPair h_sensitivities(const DecisionContext& ctx,
                                const ReturnModel& model,
                                const SystemParams& p,
                                const QuadratureSpec& spec) {
  const DecisionResult d = solve_supply(ctx, model, p, spec);
  if (d.binding != Binding::Interior)
    throw ModelError(ErrorKind::SensitivityUndefined,
                     std::string("optimum is at the ") + to_string(d.binding));
  SensitivityPair s;
  s.L_star = d.L_star;
  if (p.speculator_mode == SpeculatorMode::UnlimitedDepth) return s;
  Objective obj(ctx, model, p, spec);
  const double h2 = obj.d2(d.L_star);
  if (!(h2 < 0.0))
    throw ModelError(ErrorKind::SensitivityUndefined,
                     "psi'' is not negative at the optimum");
  const double dh_dK = -obj.dK_of_d1(d.L_star) / h2;
  s.dh_drho = dh_dK * ctx.N_prev * ctx.X;
  s.dh_dn = dh_dK * ctx.X;
  return s;
}

}  // namespace stblsim
