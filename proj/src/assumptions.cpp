#include "stblsim/assumptions.hpp"

#include <algorithm>
#include <stdexcept>

#include "stblsim/model_core.hpp"

namespace stblsim {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::HoldsNumericallyOnGrid: return "holds-numerically-on-grid";
    case Verdict::NotApplicable: return "not-applicable";
  }
  return "unknown";
}

const AssumptionCheck& AssumptionReport::get(int id) const {
  for (const auto& c : checks)
    if (c.id == id) return c;
  throw std::out_of_range("no assumption check " + std::to_string(id));
}

bool AssumptionReport::holds(int id) const {
  return get(id).verdict != Verdict::Fails;
}

bool AssumptionReport::all_hold() const {
  return std::none_of(checks.begin(), checks.end(), [](const auto& c) {
    return c.verdict == Verdict::Fails;
  });
}

namespace {

Verdict verdict(bool ok) { return ok ? Verdict::Holds : Verdict::Fails; }

AssumptionCheck make(int id, const char* name, bool ok, double value,
                     double threshold) {
  AssumptionCheck c;
  c.id = id;
  c.name = name;
  c.verdict = verdict(ok);
  c.value = value;
  c.threshold = threshold;
  return c;
}

double prob_B(const ReturnModel& model, double L, double Nbar, double X,
              const SystemParams& p) {
  if (L <= 0.0) return 0.0;
  return event_probabilities(model, X, thresholds(L, Nbar, p)).p_B;
}

}  // namespace

AssumptionReport check_assumptions(const ReturnModel& model,
                                   const SystemState& s,
                                   const SystemParams& p,
                                   const QuadratureSpec& spec) {
  AssumptionReport rep;
  const double m = model.mean();
  const double calL = p.zeta + s.L;
  const bool has_collateral = s.Nbar > 0.0 && s.L > 0.0;
  Thresholds th{0.0, 0.0};
  EventProbabilities ev;
  if (has_collateral) {
    th = thresholds(s.L, s.Nbar, p);
    ev = event_probabilities(model, s.X, th);
  }

  rep.checks.push_back(make(1, "submartingale returns", m >= 1.0, m, 1.0));

  AssumptionCheck a2;
  a2.id = 2;
  a2.name = "continuous return density";
  a2.verdict = model.point_mass() ? Verdict::NotApplicable : Verdict::Holds;
  rep.checks.push_back(a2);

  rep.checks.push_back(
      make(3, "expected return bounded by r", m <= p.r_bound, m, p.r_bound));
  rep.checks.push_back(
      make(4, "exhaustion price bounded by u", th.c <= p.u_bound, th.c,
           p.u_bound));
  rep.checks.push_back(
      make(5, "supply bounded below by v", calL >= p.v_floor, calL, p.v_floor));

  const double repurchase = p.alpha * price(calL, p);
  rep.checks.push_back(make(6, "liquidation repurchase price above 1",
                            repurchase > 1.0, repurchase, 1.0));

  {
    AssumptionCheck c;
    c.id = 7;
    c.name = "partial-liquidation probability increasing in L";
    if (!has_collateral) {
      c.verdict = Verdict::NotApplicable;
    } else {
      const int n = 40;
      double prev = -1.0, worst = kInf;
      bool ok = true;
      for (int k = 0; k <= n; ++k) {
        const double L = s.L * (0.5 + static_cast<double>(k) / n);
        const double pb = prob_B(model, L, s.Nbar, s.X, p);
        if (prev >= 0.0) {
          worst = std::min(worst, pb - prev);
          if (pb < prev - 1e-14) ok = false;
        }
        prev = pb;
      }
      c.value = worst;
      c.threshold = 0.0;
      c.verdict = ok ? Verdict::HoldsNumericallyOnGrid : Verdict::Fails;
    }
    rep.checks.push_back(c);
  }

  {
    AssumptionCheck c;
    c.id = 8;
    c.name = "concavity bound on the exhaustion point";
    if (p.demand_mode != DemandMode::UnitElastic || !has_collateral) {
      c.verdict = Verdict::NotApplicable;
    } else {
      const double suff = 27.0 / 46.0 * p.alpha * p.demand_D;
      c.value = calL;
      c.threshold = suff;
      c.verdict = verdict(calL >= suff);
      const double y = s.Nbar * th.c;
      c.direct_value =
          p.alpha * p.demand_D * y / (2.0 * (y - calL) * (y - calL));
      c.direct_verdict = verdict(c.direct_value <= 2.0);
    }
    rep.checks.push_back(c);
  }

  rep.checks.push_back(make(9, "strict submartingale or liquidation risk",
                            m > 1.0 || ev.p_B > 0.0, m, 1.0));
  rep.checks.push_back(make(10, "no-wipeout probability at least 1/kappa",
                            ev.p_A + ev.p_B >= 1.0 / p.kappa,
                            ev.p_A + ev.p_B, 1.0 / p.kappa));

  {
    double integral = 0.0;
    if (has_collateral) {
      const double K = s.Nbar * s.X, a = 1.0 / (p.beta - 1.0);
      integral = expect(
          model,
          [&](double z) {
            const double y = K * z;
            const double ell = (p.beta * s.L - y) * a;
            const auto pc = price_curve(calL - ell, p);
            return p.beta * a * (1.0 - p.alpha * pc.P) +
                   ell * p.alpha * pc.dP * a;
          },
          th.c / s.X, th.b / s.X, spec);
    }
    rep.checks.push_back(make(11, "liquidations reduce leverage in expectation",
                              integral <= 0.0, integral, 0.0));
  }
  return rep;
}

}  // namespace stblsim
