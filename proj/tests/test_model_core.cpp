#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "stblsim/model_core.hpp"

using namespace stblsim;

static SystemParams unit(double D = 100.0, double alpha = 1.0) {
  SystemParams p;
  p.demand_D = D;
  p.alpha = alpha;
  return p;
}

TEST_CASE("clearing price") {
  auto p = unit();
  CHECK(clearing_price(100.0, p) == doctest::Approx(1.0));
  CHECK(clearing_price(200.0, p) == doctest::Approx(0.5));

  SystemParams ce;
  ce.demand_mode = DemandMode::ConstantElasticity;
  ce.elasticity_gamma = 2.0;
  ce.q_unit = 100.0;
  CHECK(clearing_price(100.0, ce) == doctest::Approx(1.0));

  SystemParams pe;
  pe.demand_mode = DemandMode::PerfectlyElastic;
  CHECK(clearing_price(37.0, pe) == 1.0);

  p.v_floor = 1.0;
  try {
    clearing_price(0.5, p);
    FAIL("expected supply-floor error");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ErrorKind::SupplyFloor);
  }
}

TEST_CASE("constant elasticity with gamma 1 and q = D is unit elastic") {
  SystemParams ce;
  ce.demand_mode = DemandMode::ConstantElasticity;
  ce.elasticity_gamma = 1.0;
  ce.q_unit = 100.0;
  auto p = unit();
  for (double calL : {3.0, 50.0, 100.0, 250.0, 1e4})
    CHECK(clearing_price(calL, ce) == doctest::Approx(clearing_price(calL, p)).epsilon(1e-14));
}

TEST_CASE("price curve derivatives match finite differences") {
  SystemParams ce;
  ce.demand_mode = DemandMode::ConstantElasticity;
  ce.elasticity_gamma = 0.7;
  ce.q_unit = 80.0;
  for (const auto& p : {unit(), ce}) {
    const double s = 93.0, h = 1e-4;
    const auto pc = price_curve(s, p);
    CHECK(pc.dP == doctest::Approx((price(s + h, p) - price(s - h, p)) / (2 * h)).epsilon(1e-7));
    CHECK(pc.d2P == doctest::Approx((price_curve(s + h, p).dP - price_curve(s - h, p).dP) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("threshold b") {
  CHECK(threshold_b(2, 3, 1.5) == doctest::Approx(1.0));
  CHECK(threshold_b(100, 150, 1.5) == doctest::Approx(1.0));
  CHECK(threshold_b(10, 4, 1.5) == doctest::Approx(3.75));
  try {
    threshold_b(1, 0, 1.5);
    FAIL("expected error");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ErrorKind::DegenerateCollateral);
  }
}

TEST_CASE("threshold c examples") {
  auto p = unit(0.0);
  CHECK(threshold_c(100, 50, p) == doctest::Approx(2.0).epsilon(1e-14));
  p = unit(100.0);
  // sqrt(60000) = 244.94897427831781
  const double expect = (244.94897427831781 - 100.0 + 100.0) / 200.0;
  CHECK(threshold_c(100, 100, p) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(threshold_c(100, 100, p) == doctest::Approx(1.224745).epsilon(1e-6));
  const double c = threshold_c(100, 100, p);
  CHECK(c >= 1.0);
  CHECK(c <= 1.5);
  CHECK(threshold_c(100, 60, p) == doctest::Approx(2.0412415).epsilon(1e-7));
}

TEST_CASE("perfectly elastic threshold c") {
  SystemParams p;
  p.demand_mode = DemandMode::PerfectlyElastic;
  p.alpha = 1.2;
  CHECK(threshold_c(40, 20, p) == doctest::Approx(3 * 1.2 * 40 / (20 * (2 * 1.2 + 1))).epsilon(1e-14));
}

TEST_CASE("threshold c agrees with the bisection oracle across modes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    SystemParams p;
    p.beta = 1.1 + 2.0 * U(rng);
    p.alpha = 1.0 + 0.5 * U(rng);
    p.zeta = (i % 3 == 0) ? 0.0 : 50.0 * U(rng);
    p.demand_D = 10.0 + 200.0 * U(rng);
    if (i % 4 == 1) {
      p.demand_mode = DemandMode::ConstantElasticity;
      p.elasticity_gamma = 0.3 + 3.0 * U(rng);
      p.q_unit = 20.0 + 200.0 * U(rng);
    } else if (i % 4 == 2) {
      p.demand_mode = DemandMode::PerfectlyElastic;
    }
    const double L = 1.0 + 300.0 * U(rng);
    const double Nbar = 1.0 + 50.0 * U(rng);
    const double c = threshold_c(L, Nbar, p);
    CHECK(c == doctest::Approx(oracle::threshold_c(L, Nbar, p)).epsilon(1e-10));
    CHECK(c == doctest::Approx(threshold_c_numeric(L, Nbar, p)).epsilon(1e-10));
    CHECK(c < threshold_b(L, Nbar, p.beta));
  }
}

TEST_CASE("exhaustion point derivatives match finite differences") {
  SystemParams ce;
  ce.demand_mode = DemandMode::ConstantElasticity;
  ce.elasticity_gamma = 1.7;
  ce.q_unit = 120.0;
  ce.zeta = 10.0;
  auto u = unit(100.0, 1.13);
  u.zeta = 5.0;
  u.beta = 1.8;
  for (const auto& p : {unit(), u, ce}) {
    const double L = 70.0, h = 1e-3;
    const auto e = exhaustion_point(L, p);
    const auto ep = exhaustion_point(L + h, p), em = exhaustion_point(L - h, p);
    CHECK(e.dy == doctest::Approx((ep.y - em.y) / (2 * h)).epsilon(1e-7));
    CHECK(e.d2y == doctest::Approx((ep.dy - em.dy) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("liquidation amount") {
  CHECK(liquidation_amount(10, 4, 3, 1.5) == doctest::Approx(6.0));
  CHECK(liquidation_amount(10, 4, 3.75, 1.5) == 0.0);
  CHECK(liquidation_amount(10, 4, 4, 2.0) == doctest::Approx(4.0));
  try {
    liquidation_amount(10, 4, 5, 1.5);
    FAIL("expected error");
  } catch (const ModelError& e) {
    CHECK(e.kind() == ErrorKind::Precondition);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double beta = 1.05 + 2 * U(rng), L = 1 + 100 * U(rng), Nb = 1 + 10 * U(rng);
    const double X = U(rng) * beta * L / Nb;
    const double ell = liquidation_amount(L, Nb, X, beta);
    CHECK(Nb * X - ell == doctest::Approx(beta * (L - ell)).epsilon(1e-12));
  }
}

TEST_CASE("apply liquidation worked example") {
  auto p = unit();
  SystemState s;
  s.L = 100;
  s.calL = 100;
  s.N = 60;
  s.Nbar = 60;
  s.X = 3;

  auto [none, o0] = apply_liquidation(s, 2.5, p);
  CHECK(o0.kind == LiquidationKind::None);
  CHECK(none.L == 100);
  CHECK(none.Y == doctest::Approx(60 * 2.5 - 100));

  auto [part, o1] = apply_liquidation(s, 2.2, p);
  CHECK(o1.kind == LiquidationKind::Partial);
  CHECK(o1.ell == doctest::Approx(36.0));
  CHECK(o1.repurchase_price == doctest::Approx(1.5625));
  CHECK(o1.ell * o1.repurchase_price == doctest::Approx(56.25));
  CHECK(o1.collateral_cost == doctest::Approx(56.25 / 2.2));
  CHECK(part.L == doctest::Approx(64.0));
  CHECK(part.Nbar == doctest::Approx(34.432).epsilon(1e-4));

  auto [wiped, o2] = apply_liquidation(s, 1.0, p);
  CHECK(o2.kind == LiquidationKind::Wipeout);
  CHECK(wiped.Nbar == 0.0);
  CHECK(wiped.wiped_out);
}

TEST_CASE("partial liquidation changes equity by the value effect") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int partials = 0;
  for (int i = 0; i < 2000; ++i) {
    auto p = unit(50 + 100 * U(rng), 1.0 + 0.3 * U(rng));
    SystemState s;
    s.L = 20 + 100 * U(rng);
    s.calL = s.L;
    s.Nbar = 10 + 40 * U(rng);
    s.N = s.Nbar + 5 * U(rng);
    const auto th = thresholds(s.L, s.Nbar, p);
    const double X = th.c + (th.b - th.c) * U(rng);
    auto [post, out] = apply_liquidation(s, X, p);
    REQUIRE(out.kind == LiquidationKind::Partial);
    ++partials;
    const double y = s.Nbar * X;
    const double effect =
        (3 * s.L - 2 * y) * (1 - p.alpha * p.demand_D / (2 * y - 2 * s.L));
    const double no_liq = s.N * X - s.L;
    CHECK(post.Y - no_liq == doctest::Approx(effect).epsilon(1e-10));
    CHECK(post.Nbar >= 0.0);
  }
  CHECK(partials == 2000);
}

TEST_CASE("elementary bounds") {
  auto b = elementary_bounds(1, 1, 1);
  CHECK(b.lower == doctest::Approx(2));
  CHECK(b.mid == doctest::Approx(std::sqrt(6.0)));
  CHECK(b.upper == doctest::Approx(3));
  b = elementary_bounds(1, 0, 5);
  CHECK(b.lower == 5);
  CHECK(b.mid == 5);
  CHECK(b.upper == 5);
  b = elementary_bounds(2, 3, 0);
  CHECK(b.lower == 6);
  CHECK(b.mid == 6);
  CHECK(b.upper == 6);
  CHECK_THROWS_AS(elementary_bounds(-1, 1, 1), ModelError);
}

TEST_CASE("threshold c respects the elementary bounds") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    auto p = unit(300 * U(rng), 1 + U(rng));
    const double L = 0.1 + 300 * U(rng), Nb = 0.1 + 30 * U(rng);
    const double c = threshold_c(L, Nb, p);
    CHECK(c >= L / Nb * (1 - 1e-12));
    CHECK(c <= (p.alpha * p.demand_D + 2 * L) / (2 * Nb) * (1 + 1e-12));
  }
}
