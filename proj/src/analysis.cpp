#include "stblsim/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "stblsim/model_core.hpp"
#include "stblsim/optimizer.hpp"

namespace stblsim {

const char* to_string(StopCause c) {
  switch (c) {
    case StopCause::Horizon: return "horizon";
    case StopCause::Tau: return "tau";
    case StopCause::Tm: return "tm";
    case StopCause::S2: return "s2";
    case StopCause::Frozen: return "frozen";
  }
  return "unknown";
}

const char* to_string(BoundVerdict v) {
  return v == BoundVerdict::Consistent ? "consistent" : "violated";
}

StopRule stable_rule(double m) {
  StopRule r;
  r.at_tau = true;
  r.at_tm = m;
  return r;
}

StopRule deleveraging_rule() {
  StopRule r;
  r.at_tau = false;
  r.at_s2 = true;
  r.from_s1 = true;
  return r;
}

std::optional<StopPoint> stop_point(const Trajectory& tr, const StopRule& rule) {
  const int n = static_cast<int>(tr.states.size());
  StopPoint sp;
  if (rule.from_s1) {
    int k = 0;
    while (k < n && !tr.events[k].stops.s1) ++k;
    if (k == n) return std::nullopt;
    sp.start = k;
  }
  for (int k = sp.start; k < n; ++k) {
    const SystemState& s = tr.states[k];
    const Stops& st = tr.events[k].stops;
    if (s.frozen()) {
      // The frozen state carries no price; stop on the last live one.
      sp.stop = std::max(sp.start, k - 1);
      sp.cause = StopCause::Frozen;
      return sp;
    }
    if (rule.at_tm && s.Z > *rule.at_tm) {
      sp.stop = k;
      sp.cause = StopCause::Tm;
      return sp;
    }
    if (rule.at_tau && st.tau) {
      sp.stop = k;
      sp.cause = StopCause::Tau;
      return sp;
    }
    if (rule.at_s2 && st.s2 && k > sp.start) {
      sp.stop = k;
      sp.cause = StopCause::S2;
      return sp;
    }
  }
  sp.stop = n - 1;
  sp.cause = StopCause::Horizon;
  return sp;
}

DeviationSeries deviation_series(const Trajectory& tr, double m,
                                 const StopPoint& at) {
  DeviationSeries d;
  d.m = m;
  d.stopped_at = at;
  for (int k = at.start; k <= at.stop; ++k)
    d.z_prime.push_back(std::abs(m - tr.states[k].Z));
  return d;
}

double max_process(const std::vector<double>& v) {
  if (v.empty())
    throw ModelError(ErrorKind::Precondition, "max_process: empty series");
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double quadratic_variation(const std::vector<double>& v) {
  if (v.size() < 2)
    throw ModelError(ErrorKind::Precondition,
                     "quadratic_variation: need at least 2 points");
  double q = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double d = v[k] - v[k - 1];
    q += d * d;
  }
  return q;
}

double max_process(const DeviationSeries& s) { return max_process(s.z_prime); }
double quadratic_variation(const DeviationSeries& s) {
  return quadratic_variation(s.z_prime);
}

namespace {

double bound_with(double factor, double epsilon, double m, double kappa,
                  double r) {
  if (!(epsilon > 0.0))
    throw ModelError(ErrorKind::Domain, "deviation bound: epsilon must be > 0");
  return std::clamp(factor * (m - 1.0 / (kappa * r)) / epsilon, 0.0, 1.0);
}

double z975() {
  static const double z =
      boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
  return z;
}

}  // namespace

double doob_deviation_bound(double epsilon, double m, double kappa, double r) {
  return bound_with(2.0, epsilon, m, kappa, r);
}

double burkholder_qv_bound(double epsilon, double m, double kappa, double r) {
  return bound_with(6.0, epsilon, m, kappa, r);
}

double expected_max_bound(double m, double kappa, double r,
                          std::optional<double> overshoot) {
  const double floor = 1.0 / (kappa * r);
  bool ok = false;
  if (floor < m)
    ok = !overshoot || *overshoot >= 0.0;
  else if (floor == m)
    ok = overshoot && *overshoot > 0.0;
  else
    ok = overshoot && *overshoot > floor - m;
  if (!ok)
    throw ModelError(ErrorKind::BoundInapplicable,
                     "expected_max_bound: no condition branch verifiable");
  return 2.0 * (m - floor);
}

Interval wilson_interval(std::int64_t k, std::int64_t n) {
  if (n <= 0) throw ModelError(ErrorKind::Domain, "wilson_interval: n <= 0");
  const double z = z975(), nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double den = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / den;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

BoundReport empirical_tail_probability(const std::vector<Trajectory>& ensemble,
                                       TailStatistic stat, double epsilon,
                                       double m, const StopRule& rule) {
  if (ensemble.size() < 100)
    throw ModelError(ErrorKind::Precondition,
                     "empirical_tail_probability: need at least 100 paths");
  std::int64_t n = 0, k = 0;
  for (const auto& tr : ensemble) {
    const auto sp = stop_point(tr, rule);
    if (!sp) continue;
    const auto d = deviation_series(tr, m, *sp);
    const double v = stat == TailStatistic::MaxDeviation
                         ? max_process(d)
                         : (d.z_prime.size() < 2
                                ? 0.0
                                : std::sqrt(quadratic_variation(d)));
    ++n;
    if (v > epsilon) ++k;
  }
  const SystemParams& p = ensemble.front().params;
  BoundReport rep;
  rep.bound_name = stat == TailStatistic::MaxDeviation ? "doob_max_deviation"
                                                       : "burkholder_qv";
  rep.theoretical = stat == TailStatistic::MaxDeviation
                        ? doob_deviation_bound(epsilon, m, p.kappa, p.r_bound)
                        : burkholder_qv_bound(epsilon, m, p.kappa, p.r_bound);
  rep.n_paths = n;
  rep.empirical = n ? static_cast<double>(k) / n : 0.0;
  const Interval w = wilson_interval(k, std::max<std::int64_t>(n, 1));
  rep.ci_halfwidth = 0.5 * (w.hi - w.lo);
  rep.verdict = rep.empirical - rep.ci_halfwidth > rep.theoretical
                    ? BoundVerdict::Violated
                    : BoundVerdict::Consistent;
  return rep;
}

std::optional<double> estimate_overshoot(const std::vector<Trajectory>& ensemble,
                                         double m, const StopRule& rule) {
  double sum = 0.0;
  int n = 0;
  for (const auto& tr : ensemble) {
    const auto sp = stop_point(tr, rule);
    if (!sp) continue;
    const double z = tr.states[sp->stop].Z;
    if (z > m) {
      sum += z - m;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

BoundReport expected_max_report(const std::vector<Trajectory>& ensemble,
                                double m, const StopRule& rule) {
  if (ensemble.empty())
    throw ModelError(ErrorKind::Precondition, "expected_max_report: no paths");
  std::vector<double> v;
  for (const auto& tr : ensemble)
    if (const auto sp = stop_point(tr, rule))
      v.push_back(max_process(deviation_series(tr, m, *sp)));
  const SystemParams& p = ensemble.front().params;
  BoundReport rep;
  rep.bound_name = "expected_max_deviation";
  rep.theoretical = expected_max_bound(m, p.kappa, p.r_bound,
                                       estimate_overshoot(ensemble, m, rule));
  rep.n_paths = static_cast<std::int64_t>(v.size());
  double mean = 0.0, ss = 0.0;
  for (double x : v) mean += x;
  mean /= std::max<std::size_t>(v.size(), 1);
  for (double x : v) ss += (x - mean) * (x - mean);
  rep.empirical = mean;
  rep.ci_halfwidth =
      v.size() > 1 ? z975() * std::sqrt(ss / (v.size() - 1) / v.size()) : 0.0;
  rep.verdict = rep.empirical - rep.ci_halfwidth > rep.theoretical
                    ? BoundVerdict::Violated
                    : BoundVerdict::Consistent;
  return rep;
}

std::vector<double> stopped_values(const Trajectory& tr, Field f, double m,
                                   const StopPoint& at, int length) {
  std::vector<double> out;
  out.reserve(length);
  const auto value = [&](int k) {
    const SystemState& s = tr.states[k];
    switch (f) {
      case Field::Z: return s.Z;
      case Field::calL: return s.calL;
      case Field::AbsDeviation: return std::abs(m - s.Z);
    }
    return s.Z;
  };
  for (int i = 0; i < length; ++i)
    out.push_back(value(std::min(at.start + i, at.stop)));
  return out;
}

DriftTest drift_test(const std::vector<std::vector<double>>& paths, Drift dir,
                     double bands) {
  DriftTest dt;
  if (paths.empty()) return dt;
  const std::size_t len = paths.front().size();
  for (std::size_t t = 0; t + 1 < len; ++t) {
    double sum = 0.0;
    int n = 0;
    for (const auto& p : paths) {
      sum += p[t + 1] - p[t];
      ++n;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& p : paths) {
      const double d = p[t + 1] - p[t] - mean;
      ss += d * d;
    }
    const double se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    dt.mean_increment.push_back(mean);
    dt.std_error.push_back(se);
    if (n < 2 || (se == 0.0 && mean == 0.0)) continue;
    ++dt.steps_tested;
    const bool ok = dir == Drift::Super ? mean <= bands * se : mean >= -bands * se;
    if (ok) ++dt.steps_consistent;
  }
  return dt;
}

VarianceApproximation variance_approximation(const SystemState& state,
                                             const ReturnModel& model,
                                             const SystemParams& p,
                                             const QuadratureSpec& spec) {
  if (state.frozen())
    throw ModelError(ErrorKind::Precondition,
                     "variance_approximation: state is frozen");
  const double rho = model.mean();
  const auto [post, liq] = apply_liquidation(state, state.X * rho, p);
  if (liq.kind != LiquidationKind::None)
    throw ModelError(ErrorKind::SensitivityUndefined,
                     "variance_approximation: liquidation at the mean return");
  DecisionContext ctx;
  ctx.L_prev = post.L;
  ctx.N_prev = post.N;
  ctx.X = post.X;
  const SensitivityPair sp = h_sensitivities(ctx, model, p, spec);

  VarianceApproximation v;
  v.h_prime = sp.dh_drho / rho;
  v.e_calL = p.zeta + sp.L_star;
  v.var_R = model.variance();
  const double dP = price_curve(v.e_calL, p).dP;
  v.delta_method = dP * dP * v.h_prime * v.h_prime * v.var_R;
  if (p.demand_mode == DemandMode::UnitElastic)
    v.as_written = p.demand_D * v.h_prime * v.h_prime * v.var_R /
                   std::pow(v.e_calL, 4);
  return v;
}

RegimeVariance regime_variance_compare(const SystemState& s,
                                       const SystemState& u,
                                       const ReturnModel& model,
                                       const SystemParams& p,
                                       std::int64_t n_paths, std::uint64_t seed,
                                       double margin) {
  const bool same_but_collateral = s.t == u.t && s.X == u.X && s.L == u.L &&
                                   s.calL == u.calL && s.Z == u.Z &&
                                   !s.frozen() && !u.frozen();
  if (!same_but_collateral)
    throw ModelError(
        ErrorKind::RegimeCompare,
        "regime_variance_compare: states must differ only in N and Nbar");
  for (const SystemState* st : {&s, &u}) {
    if (st->L > 0.0 && st->X < threshold_b(st->L, st->Nbar, p.beta) + margin)
      throw ModelError(ErrorKind::RegimeCompare,
                       "regime_variance_compare: X is within the margin of b");
  }
  if (n_paths < 2)
    throw ModelError(ErrorKind::Precondition,
                     "regime_variance_compare: need at least 2 draws");

  Rng rng(seed);
  std::vector<double> zs(n_paths), zu(n_paths);
  for (std::int64_t i = 0; i < n_paths; ++i) {
    const double R = model.sample(rng);
    const auto a = transition(s, R, model, p).first;
    const auto b = transition(u, R, model, p).first;
    if (a.frozen() || b.frozen())
      throw ModelError(ErrorKind::RegimeCompare,
                       "regime_variance_compare: a draw left the solvent region");
    zs[i] = a.Z;
    zu[i] = b.Z;
  }
  const double n = static_cast<double>(n_paths);
  double ms = 0.0, mu = 0.0;
  for (std::int64_t i = 0; i < n_paths; ++i) ms += zs[i], mu += zu[i];
  ms /= n;
  mu /= n;
  double vs = 0.0, vu = 0.0;
  std::vector<double> d(n_paths);
  for (std::int64_t i = 0; i < n_paths; ++i) {
    const double a = (zs[i] - ms) * (zs[i] - ms);
    const double b = (zu[i] - mu) * (zu[i] - mu);
    vs += a;
    vu += b;
    d[i] = b - a;
  }
  RegimeVariance out;
  out.n = n_paths;
  out.var_s = vs / (n - 1.0);
  out.var_u = vu / (n - 1.0);
  const double md = (vu - vs) / n;
  double sd = 0.0;
  for (double x : d) sd += (x - md) * (x - md);
  out.se_diff = std::sqrt(sd / (n - 1.0) / n);
  return out;
}

}  // namespace stblsim
