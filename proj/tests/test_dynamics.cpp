#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "stblsim/dynamics.hpp"
#include "stblsim/model_core.hpp"

using namespace stblsim;

namespace {

SystemParams stable_params() {
  SystemParams p;
  p.alpha = 1.13;
  p.kappa = 1.0 / 0.999;
  p.r_bound = 1.0011;
  return p;
}

bool same(const SystemState& a, const SystemState& b) {
  return a.t == b.t && a.X == b.X && a.L == b.L && a.calL == b.calL &&
         a.N == b.N && a.Nbar == b.Nbar && a.Z == b.Z && a.Y == b.Y &&
         a.wiped_out == b.wiped_out && a.halted == b.halted;
}

}  // namespace

TEST_CASE("fixed point of the decision map") {
  SystemParams p;
  const auto one = ReturnModel::uniform(1.0, 1.0);
  auto s = initial_state(p, 1.0, 100.0, 300.0);
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    auto [n, ev] = step(s, one, p, rng);
    CHECK(n.L == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(n.Z == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n.N == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(n.X == 1.0);
    CHECK(ev.liquidation.kind == LiquidationKind::None);
    s = n;
  }
}

TEST_CASE("forced liquidation caps the same-step decision") {
  SystemParams p;
  SystemState s;
  s.L = 100;
  s.calL = 100;
  s.N = 60;
  s.Nbar = 60;
  s.X = 3;
  s.Z = 1;
  const auto model = ReturnModel::lognormal(0.0, 0.05);
  // Without spare ETH the buyback floor sits above the collateral cap.
  auto [broke, ev0] = transition(s, 2.2 / 3.0, model, p);
  CHECK(broke.halted);
  REQUIRE(ev0.halt_kind.has_value());
  CHECK(*ev0.halt_kind == ErrorKind::Insolvency);
  CHECK(ev0.liquidation.ell == doctest::Approx(36.0));

  s.N = 90;
  auto [n, ev] = transition(s, 2.2 / 3.0, model, p);
  CHECK(ev.liquidation.kind == LiquidationKind::Partial);
  CHECK(ev.liquidation.ell == doctest::Approx(36.0));
  REQUIRE_FALSE(n.halted);
  CHECK(n.L <= 64.0 * (1 + 1e-12));
  CHECK(ev.constraint_binding);
  CHECK(n.Z == doctest::Approx(p.demand_D / n.calL).epsilon(1e-14));
}

TEST_CASE("optimal decision beats perturbed decisions in sample") {
  SystemParams p;
  p.alpha = 1.1;
  const auto model = ReturnModel::lognormal(0.002, 0.25);
  DecisionContext ctx{100.0, 1.9, 100.0};
  const double Ls = solve_supply(ctx, model, p).L_star;
  Rng rng(11);
  const int n = 100000;
  std::vector<double> R(n);
  for (auto& r : R) r = model.sample(rng);
  for (double f : {0.9, 0.97, 1.03, 1.1}) {
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i)
      diff[i] = oracle::realized_equity(Ls, R[i], ctx.L_prev, ctx.N_prev, ctx.X, p) -
                oracle::realized_equity(f * Ls, R[i], ctx.L_prev, ctx.N_prev, ctx.X, p);
    CHECK(oracle::mean(diff) >= -3.0 * oracle::stderr_of_mean(diff));
  }
}

TEST_CASE("transition matches the literal step mechanics") {
  SystemParams p;
  p.alpha = 1.1;
  const auto model = ReturnModel::lognormal(0.0, 0.2);
  auto s = initial_state(p, 100.0, 100.0, 1.8);
  for (double R : {1.3, 1.0, 0.8, 0.75}) {
    auto [n, ev] = transition(s, R, model, p);
    const double Xn = s.X * R;
    if (n.halted) continue;
    CHECK(n.Y == doctest::Approx(oracle::realized_equity(s.L, R, s.L, s.Nbar, s.X, p) +
                                 (s.N - s.Nbar) * Xn)
                     .epsilon(1e-9));
    CHECK(n.calL == p.zeta + n.L);
    CHECK(n.Z == doctest::Approx(oracle::price(n.calL, p)).epsilon(1e-14));
    const double N_post = s.N - ev.liquidation.collateral_cost;
    const double L_post = s.L - (ev.liquidation.kind == LiquidationKind::Partial
                                     ? ev.liquidation.ell
                                     : 0.0);
    CHECK(n.N == doctest::Approx(N_post + (n.L - L_post) * n.Z / Xn).epsilon(1e-12));
    CHECK(n.Nbar == doctest::Approx(N_post).epsilon(1e-12));
  }
}

TEST_CASE("simulate contract and determinism") {
  auto p = stable_params();
  const auto model = ReturnModel::lognormal(0.0005, 0.04);
  auto s0 = initial_state(p, 1.0, 100.0, 300.0);
  SimOptions o;
  o.horizon = 0;
  Rng rng(1);
  CHECK_THROWS_AS(simulate(s0, ReturnSchedule(model), p, o, rng), ModelError);
  o.horizon = 1;
  auto one = simulate(s0, ReturnSchedule(model), p, o, rng);
  CHECK(one.states.size() == 2);
  CHECK(one.events.size() == 2);

  o.horizon = 30;
  Rng a = path_stream(77, 4), b = path_stream(77, 4);
  auto ta = simulate(s0, ReturnSchedule(model), p, o, a);
  auto tb = simulate(s0, ReturnSchedule(model), p, o, b);
  for (std::size_t k = 0; k < ta.states.size(); ++k) {
    CHECK(ta.states[k].t == static_cast<int>(k));
    CHECK(same(ta.states[k], tb.states[k]));
    CHECK(ta.events[k].cond.e_L == tb.events[k].cond.e_L);
  }
  REQUIRE(ta.initial_condition.has_value());
  CHECK(*ta.initial_condition);
}

TEST_CASE("rescaled runs share the price path") {
  SystemParams p;
  p.alpha = 1.1;
  p.zeta = 10.0;
  const auto model = ReturnModel::lognormal(0.0, 0.15);
  SimOptions o;
  o.horizon = 40;
  o.detector_every = 0;
  const auto s0 = initial_state(p, 100.0, 90.0, 2.0);
  Rng r0(9);
  const auto base = simulate(s0, ReturnSchedule(model), p, o, r0);
  for (double g : {0.01, 0.5, 3.0, 250.0}) {
    auto q = p;
    q.demand_D *= g;
    q.zeta *= g;
    q.v_floor *= g;
    Rng r1(9);
    const auto tr = simulate(initial_state(q, 100.0, 90.0 * g, 2.0 * g),
                             ReturnSchedule(model), q, o, r1);
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      CHECK(tr.states[k].Z == doctest::Approx(base.states[k].Z).epsilon(1e-8));
      CHECK(tr.states[k].wiped_out == base.states[k].wiped_out);
    }
  }
}

TEST_CASE("conditional expectations in the liquidation-free regime") {
  SystemParams p;
  const auto draw = ReturnModel::lognormal(0.001, 0.03);
  auto s = initial_state(p, 1.0, 95.0, 400.0);
  for (double mu : {0.0, 0.002, -0.001}) {
    const auto decide = ReturnModel::lognormal(mu, 0.03);
    const auto c = conditional_next(s, draw, decide, p);
    const double h = std::sqrt(p.demand_D * s.L * decide.mean());
    CHECK(c.e_L == doctest::Approx(h).epsilon(1e-10));
    CHECK(c.e_inv_L == doctest::Approx(1.0 / h).epsilon(1e-10));
    CHECK(c.e_Z == doctest::Approx(p.demand_D / h).epsilon(1e-10));
  }
}

TEST_CASE("conditional expectations collapse for a degenerate return") {
  SystemParams p;
  p.alpha = 1.1;
  auto s = initial_state(p, 100.0, 100.0, 1.7);
  const auto decide = ReturnModel::lognormal(0.0, 0.15);
  for (double R : {1.0, 0.85}) {
    const auto narrow = ReturnModel::uniform(R * (1 - 1e-12), R * (1 + 1e-12));
    const auto c = conditional_next(s, narrow, decide, p);
    const auto n = transition(s, R, decide, p).first;
    CHECK(c.e_L == doctest::Approx(n.calL).epsilon(1e-9));
    CHECK(c.e_inv_L == doctest::Approx(1.0 / n.calL).epsilon(1e-9));
    CHECK(c.e_Z == doctest::Approx(n.Z).epsilon(1e-9));
  }
}

TEST_CASE("stop detector boundaries") {
  SystemState s;
  s.calL = 100;
  s.L = 100;
  s.Z = 1.0;
  ConditionalExpectations c{1.0 / 100.0, 100.0, 1.0};
  auto st = detect_stops(s, c, {1.0, 0.99}, false);
  CHECK_FALSE(st.tau);
  CHECK_FALSE(st.s1);
  CHECK_FALSE(st.tm[0]);
  CHECK(st.tm[1]);
  CHECK_FALSE(st.s2);
  st = detect_stops(s, c, {1.0}, true);
  CHECK(st.s2);
  c.e_L = 99.0;
  c.e_inv_L = 1.0 / 99.0;
  st = detect_stops(s, c, {}, true);
  CHECK(st.tau);
  CHECK(st.s1);
  CHECK_FALSE(st.s2);
  st = detect_stops(s, std::nullopt, {0.5}, false);
  CHECK_FALSE(st.tau);
  CHECK(st.tm[0]);
}

TEST_CASE("S1 implies tau over random strained states") {
  std::mt19937_64 g(123);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int evaluated = 0, s1 = 0, tau = 0;
  for (int i = 0; i < 10000; ++i) {
    SystemParams p;
    p.alpha = 1.0 + 0.3 * U(g);
    p.zeta = 20.0 * U(g);
    const double L = 50.0 + 100.0 * U(g);
    const double ratio = 1.55 + 1.5 * U(g);
    auto s = initial_state(p, 1.0, L, ratio * L);
    const auto model = ReturnModel::lognormal(-0.06 + 0.08 * U(g), 0.05 + 0.3 * U(g));
    DetectorOptions o;
    o.nodes = 4;
    try {
      const auto c = conditional_next(s, model, model, p, o);
      ++evaluated;
      CHECK(c.e_inv_L * c.e_L >= 1.0 - 1e-12);
      const auto st = detect_stops(s, c, {}, false);
      if (st.s1) {
        ++s1;
        CHECK(st.tau);
      }
      tau += st.tau;
    } catch (const ModelError& e) {
      CHECK(e.kind() == ErrorKind::DetectorUnavailable);
    }
  }
  CHECK(evaluated > 2000);
  CHECK(s1 > 100);
  CHECK(tau >= s1);
}

TEST_CASE("crisis trajectories: frozen after wipeout, S2 after S1") {
  SystemParams p;
  p.alpha = 1.1;
  ReturnSchedule sched(ReturnModel::lognormal(0.002, 0.05));
  sched.add_switch(10, ReturnModel::lognormal(-0.08, 0.12));
  SimOptions o;
  o.horizon = 40;
  o.detector.nodes = 4;
  const auto s0 = initial_state(p, 1.0, 100.0, 180.0);
  int wiped = 0, halted = 0, s2 = 0;
  for (std::uint64_t path = 0; path < 30; ++path) {
    Rng rng = path_stream(5, path);
    const auto tr = simulate(s0, sched, p, o, rng);
    bool s1_seen = false, frozen = false;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      const auto& st = tr.states[k];
      if (frozen) {
        CHECK(st.L == tr.states[k - 1].L);
        CHECK(st.N == tr.states[k - 1].N);
      }
      if (!st.frozen()) {
        CHECK(st.calL == p.zeta + st.L);
        CHECK(st.Z == doctest::Approx(oracle::price(st.calL, p)).epsilon(1e-14));
      }
      const auto& stops = tr.events[k].stops;
      if (stops.s2) {
        CHECK(s1_seen);
        ++s2;
      }
      if (stops.s1) s1_seen = true;
      frozen = st.frozen();
    }
    wiped += tr.states.back().wiped_out;
    halted += tr.states.back().halted;
  }
  MESSAGE("wiped " << wiped << " halted " << halted << " s2 " << s2);
  CHECK(wiped + halted > 0);
}

TEST_CASE("schedule lookup") {
  ReturnSchedule s(ReturnModel::lognormal(0.0, 0.1));
  s.add_switch(20, ReturnModel::lognormal(-0.1, 0.1));
  s.add_switch(5, ReturnModel::uniform(0.9, 1.1));
  CHECK(s.at(0).kind_name() == "lognormal");
  CHECK(s.at(5).kind_name() == "uniform");
  CHECK(s.at(19).kind_name() == "uniform");
  CHECK(s.at(20).mean() == doctest::Approx(std::exp(-0.1 + 0.005)));
}
