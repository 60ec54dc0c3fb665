#include "stblsim/dynamics.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "stblsim/model_core.hpp"

namespace stblsim {

void ReturnSchedule::add_switch(int from_step, ReturnModel model) {
  switches_.emplace_back(from_step, std::move(model));
  std::stable_sort(switches_.begin(), switches_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
}

const ReturnModel& ReturnSchedule::at(int t) const {
  const ReturnModel* m = &base_;
  for (const auto& [from, model] : switches_)
    if (from <= t) m = &model;
  return *m;
}

SystemState initial_state(const SystemParams& p, double X0, double L0,
                          double N0) {
  if (!(X0 > 0.0) || L0 < 0.0 || N0 < 0.0)
    throw ModelError(ErrorKind::Domain,
                     "initial_state: need X0 > 0, L0 >= 0, N0 >= 0");
  SystemState s;
  s.X = X0;
  s.L = L0;
  s.calL = p.zeta + L0;
  s.N = N0;
  s.Nbar = N0;
  s.Z = clearing_price(s.calL, p);
  s.Y = N0 * X0 - L0;
  return s;
}

std::pair<SystemState, StepEvents> transition(const SystemState& state,
                                              double R,
                                              const ReturnModel& decide_model,
                                              const SystemParams& p,
                                              const QuadratureSpec& spec) {
  if (state.frozen())
    throw ModelError(ErrorKind::Precondition, "transition: state is frozen");
  StepEvents ev;
  const double X_next = state.X * R;
  auto [post, liq] = apply_liquidation(state, X_next, p);
  post.t = state.t + 1;
  ev.liquidation = liq;
  if (post.wiped_out) return {post, ev};

  DecisionContext ctx;
  ctx.L_prev = post.L;
  ctx.N_prev = post.N;
  ctx.X = X_next;
  if (liq.kind == LiquidationKind::Partial) ctx.forced_cap = post.L;

  SystemState s = post;
  try {
    SolveOptions o;
    o.evaluate_psi = false;
    const DecisionResult d = solve_supply(ctx, decide_model, p, spec, o);
    const double Z = clearing_price(p.zeta + d.L_star, p);
    s.L = d.L_star;
    s.calL = p.zeta + d.L_star;
    s.Z = Z;
    s.N = post.N + (d.L_star - post.L) * Z / X_next;
    s.Nbar = p.collateral_mode == CollateralMode::Lagged ? post.N : s.N;
    ev.binding = d.binding;
    ev.constraint_binding = d.binding != Binding::Interior;
    ev.fallback = d.fallback;
  } catch (const ModelError& e) {
    s.halted = true;
    ev.halt_kind = e.kind();
    ev.halt_reason = e.what();
  }
  return {s, ev};
}

std::pair<SystemState, StepEvents> step(const SystemState& state,
                                        const ReturnModel& draw_model,
                                        const ReturnModel& decide_model,
                                        const SystemParams& p, Rng& rng,
                                        const QuadratureSpec& spec) {
  if (state.frozen())
    throw ModelError(ErrorKind::Precondition, "step: state is frozen");
  return transition(state, draw_model.sample(rng), decide_model, p, spec);
}

std::pair<SystemState, StepEvents> step(const SystemState& state,
                                        const ReturnModel& model,
                                        const SystemParams& p, Rng& rng) {
  return step(state, model, model, p, rng);
}

ConditionalExpectations conditional_next(const SystemState& state,
                                         const ReturnModel& draw_model,
                                         const ReturnModel& decide_model,
                                         const SystemParams& p,
                                         const DetectorOptions& opts) {
  if (state.frozen())
    throw ModelError(ErrorKind::DetectorUnavailable,
                     "conditional_next: state is frozen");

  using Acc = Eigen::Array3d;
  const auto at = [&](double R) -> Acc {
    const auto next = transition(state, R, decide_model, p, opts.spec).first;
    if (next.halted)
      throw ModelError(ErrorKind::DetectorUnavailable,
                       "conditional_next: nested decision failed at R=" +
                           std::to_string(R));
    if (next.wiped_out) {
      const double Z = p.zeta > 0.0 ? price(p.zeta, p) : kInf;
      return Acc(p.zeta > 0.0 ? 1.0 / p.zeta : kInf, p.zeta, Z);
    }
    return Acc(1.0 / next.calL, next.calL, next.Z);
  };

  Acc sum = Acc::Zero();
  double mass = 0.0;
  if (draw_model.point_mass()) {
    sum = at(draw_model.atom());
    mass = 1.0;
  } else {
    double u_c = 0.0, u_b = 0.0;
    if (state.L > 0.0 && state.Nbar > 0.0) {
      const Thresholds th = thresholds(state.L, state.Nbar, p);
      u_c = draw_model.cdf(th.c / state.X);
      u_b = std::max(u_c, draw_model.cdf(th.b / state.X));
    }
    const GaussRule& rule = gauss_legendre(opts.nodes);
    const std::array<std::pair<double, double>, 3> regions{
        {{0.0, u_c}, {u_c, u_b}, {u_b, 1.0}}};
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const auto [a, b] = regions[k];
      const double w = b - a;
      if (w < opts.min_region_mass) continue;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double u = a + 0.5 * w * (rule.nodes[i] + 1.0);
        const double wi = 0.5 * w * rule.weights[i];
        sum += wi * at(draw_model.quantile(u));
        mass += wi;
      }
    }
  }
  ConditionalExpectations c;
  c.e_inv_L = sum[0] / mass;
  c.e_L = sum[1] / mass;
  c.e_Z = sum[2] / mass;
  if (!(c.e_inv_L * c.e_L >= 1.0 - 1e-12))
    throw std::logic_error("conditional_next: Jensen inequality violated");
  return c;
}

Stops detect_stops(const SystemState& s,
                   const std::optional<ConditionalExpectations>& cond,
                   const std::vector<double>& m_levels, bool s1_seen) {
  Stops st;
  st.tm.assign(m_levels.size(), false);
  if (s.frozen()) return st;
  for (std::size_t i = 0; i < m_levels.size(); ++i)
    st.tm[i] = s.Z > m_levels[i];
  if (!cond) return st;
  st.tau = cond->e_inv_L > 1.0 / s.calL;
  st.s1 = cond->e_L < s.calL;
  if (st.s1 && !st.tau) {
    // Jensen gives tau whenever S1 holds; only rounding can separate them.
    if (cond->e_inv_L * s.calL < 1.0 - 1e-12)
      throw std::logic_error("detect_stops: S1 without tau");
    st.tau = true;
  }
  st.s2 = s1_seen && !st.s1;
  return st;
}

Trajectory simulate(const SystemState& initial, const ReturnSchedule& schedule,
                    const SystemParams& p, const SimOptions& opts, Rng& rng) {
  if (opts.horizon < 1)
    throw ModelError(ErrorKind::Precondition, "simulate: horizon must be >= 1");
  Trajectory tr;
  tr.params = p;
  tr.states.reserve(opts.horizon + 1);
  tr.events.reserve(opts.horizon + 1);
  tr.states.push_back(initial);
  tr.states.back().t = 0;
  tr.events.emplace_back();

  bool s1_seen = false;
  const auto detect = [&](int k) {
    const SystemState& s = tr.states[k];
    StepEvents& ev = tr.events[k];
    std::optional<ConditionalExpectations> cond;
    if (!s.frozen() && opts.detector_every > 0 && k % opts.detector_every == 0) {
      try {
        cond = conditional_next(s, schedule.at(k), schedule.at(k + 1), p,
                                opts.detector);
        ev.detector_available = true;
        ev.cond = *cond;
      } catch (const ModelError&) {
        cond.reset();
      }
    }
    ev.stops = detect_stops(s, cond, opts.m_levels, s1_seen);
    if (ev.stops.s1) s1_seen = true;
    if (k == 0 && cond) tr.initial_condition = cond->e_inv_L <= 1.0 / s.calL;
  };

  detect(0);
  for (int k = 1; k <= opts.horizon; ++k) {
    const SystemState& prev = tr.states[k - 1];
    if (prev.frozen()) {
      SystemState s = prev;
      s.t = k;
      tr.states.push_back(s);
      tr.events.emplace_back();
    } else {
      auto [s, ev] = step(prev, schedule.at(k - 1), schedule.at(k), p, rng,
                          opts.spec);
      tr.states.push_back(s);
      tr.events.push_back(std::move(ev));
    }
    detect(k);
  }
  return tr;
}

}  // namespace stblsim
