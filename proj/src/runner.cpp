#include "stblsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "stblsim/analysis.hpp"
#include "stblsim/assumptions.hpp"
#include "stblsim/model_core.hpp"

namespace stblsim {

using json = nlohmann::ordered_json;

namespace {

std::string num(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// JSON has no inf or nan; those become null.
json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json to_json(const BoundReport& r) {
  return {{"bound_name", r.bound_name},
          {"theoretical", jnum(r.theoretical)},
          {"empirical", jnum(r.empirical)},
          {"ci_halfwidth", jnum(r.ci_halfwidth)},
          {"n_paths", r.n_paths},
          {"verdict", to_string(r.verdict)}};
}

json error_json(const std::exception& e) {
  json j = {{"error", e.what()}};
  if (const auto* me = dynamic_cast<const ModelError*>(&e))
    j["kind"] = to_string(me->kind());
  return j;
}

json to_json(const AssumptionReport& rep) {
  json a = json::array();
  for (const auto& c : rep.checks) {
    json j = {{"id", c.id},
              {"name", c.name},
              {"verdict", to_string(c.verdict)},
              {"value", jnum(c.value)},
              {"threshold", jnum(c.threshold)}};
    if (c.id == 8) {
      j["direct_value"] = jnum(c.direct_value);
      j["direct_verdict"] = to_string(c.direct_verdict);
    }
    a.push_back(j);
  }
  return a;
}

json drift_json(const DriftTest& d, Drift dir) {
  return {{"direction", dir == Drift::Super ? "super" : "sub"},
          {"steps_tested", d.steps_tested},
          {"steps_consistent", d.steps_consistent},
          {"fraction", d.fraction()}};
}

const char* state_name(const SystemState& s) {
  return s.wiped_out ? "wiped-out" : s.halted ? "halted" : "live";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ModelError(ErrorKind::Config, "trajectories: missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw ModelError(ErrorKind::Config,
                       "trajectories: row " + std::to_string(t.rows.size()) +
                           " has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ModelError(ErrorKind::Config, "trajectories: no header");
  return t;
}

double parse_double(const std::string& s) {
  if (s.empty()) return NAN;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ModelError(ErrorKind::Config, "trajectories: not a number: " + s);
  return v;
}

bool close(double a, double b, double rel) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double h = (v.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ModelError(ErrorKind::Config, "cannot write " + p.string());
  out << text;
  if (!out) throw ModelError(ErrorKind::Config, "write failed: " + p.string());
}

std::string comment_block(const RunConfig& cfg) {
  return "# config_hash: " + config_hash(cfg) + "\n# seed: " + std::to_string(cfg.seed) +
         "\n";
}

}  // namespace

std::vector<Trajectory> run_ensemble(const RunConfig& cfg, unsigned threads) {
  cfg.validate();
  const ReturnSchedule schedule = cfg.schedule_models();
  const SystemState s0 = cfg.initial_state();
  const SimOptions opts = cfg.sim_options();
  const auto n = static_cast<std::size_t>(cfg.n_paths);

  std::vector<Trajectory> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        Rng rng = path_stream(cfg.seed, i);
        out[i] = simulate(s0, schedule, cfg.params, opts, rng);
        out[i].seed = cfg.seed;
        out[i].path = i;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::string trajectories_csv(const RunConfig& cfg,
                             const std::vector<Trajectory>& ensemble) {
  std::string out = comment_block(cfg);
  out += "path,t,X,L,calL,N,Nbar,Z,Y,state,liquidation,ell,binding,fallback,tau,s1,s2";
  for (std::size_t i = 0; i < cfg.m_levels.size(); ++i) out += ",tm_" + std::to_string(i);
  out += ",e_inv_L,e_L,e_Z,halt\n";
  for (const auto& tr : ensemble) {
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      const SystemState& s = tr.states[k];
      const StepEvents& ev = tr.events[k];
      out += std::to_string(tr.path) + ',' + std::to_string(s.t) + ',' + num(s.X) + ',' +
             num(s.L) + ',' + num(s.calL) + ',' + num(s.N) + ',' + num(s.Nbar) + ',' +
             num(s.Z) + ',' + num(s.Y) + ',' + state_name(s) + ',' +
             to_string(ev.liquidation.kind) + ',' + num(ev.liquidation.ell) + ',' +
             to_string(ev.binding) + ',' + (ev.fallback ? '1' : '0') + ',' +
             (ev.stops.tau ? '1' : '0') + ',' + (ev.stops.s1 ? '1' : '0') + ',' +
             (ev.stops.s2 ? '1' : '0');
      for (std::size_t i = 0; i < cfg.m_levels.size(); ++i)
        out += ',' + std::string(i < ev.stops.tm.size() && ev.stops.tm[i] ? "1" : "0");
      if (ev.detector_available)
        out += ',' + num(ev.cond.e_inv_L) + ',' + num(ev.cond.e_L) + ',' + num(ev.cond.e_Z);
      else
        out += ",,,";
      out += ',';
      if (ev.halt_kind) out += to_string(*ev.halt_kind);
      out += '\n';
    }
  }
  return out;
}

std::string assumptions_json(const RunConfig& cfg) {
  const auto rep = check_assumptions(cfg.schedule_models().at(0), cfg.initial_state(),
                                     cfg.params);
  json j = {{"checks", to_json(rep)}, {"all_hold", rep.all_hold()}};
  return j.dump(2) + "\n";
}

namespace {

json bounds_entries(const RunConfig& cfg) {
  json a = json::array();
  const SystemParams& p = cfg.params;
  for (double m : cfg.m_levels) {
    json j = {{"m", m},
              {"epsilon", cfg.epsilon},
              {"kappa", p.kappa},
              {"r_bound", p.r_bound},
              {"doob_max_deviation",
               doob_deviation_bound(cfg.epsilon, m, p.kappa, p.r_bound)},
              {"burkholder_qv", burkholder_qv_bound(cfg.epsilon, m, p.kappa, p.r_bound)}};
    try {
      j["expected_max_deviation"] = expected_max_bound(m, p.kappa, p.r_bound);
    } catch (const ModelError& e) {
      j["expected_max_deviation"] = error_json(e);
    }
    a.push_back(j);
  }
  return a;
}

}  // namespace

std::string bounds_json(const RunConfig& cfg) {
  json j = {{"bounds", bounds_entries(cfg)}};
  return j.dump(2) + "\n";
}

Report build_report(const RunConfig& cfg, const std::vector<Trajectory>& ensemble) {
  Report out;
  json j;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["n_paths"] = cfg.n_paths;
  j["horizon"] = cfg.horizon;

  const SystemState s0 = cfg.initial_state();
  const ReturnSchedule schedule = cfg.schedule_models();
  {
    const auto rep = check_assumptions(schedule.at(0), s0, cfg.params);
    j["assumptions"] = {{"checks", to_json(rep)}, {"all_hold", rep.all_hold()}};
  }

  std::int64_t ic_holds = 0, ic_fails = 0, ic_unknown = 0;
  for (const auto& tr : ensemble) {
    if (!tr.initial_condition) ++ic_unknown;
    else if (*tr.initial_condition) ++ic_holds;
    else ++ic_fails;
  }
  j["initial_condition"] = {{"holds", ic_holds}, {"fails", ic_fails}, {"unavailable", ic_unknown}};
  j["bounds"] = bounds_entries(cfg);

  const int length = cfg.horizon + 1;
  const auto histogram = [&](const StopRule& rule) {
    std::map<std::string, std::int64_t> causes{
        {"horizon", 0}, {"tau", 0}, {"tm", 0}, {"s2", 0}, {"frozen", 0}};
    std::vector<std::int64_t> at(length, 0);
    std::int64_t excluded = 0;
    for (const auto& tr : ensemble) {
      const auto sp = stop_point(tr, rule);
      if (!sp) {
        ++excluded;
        continue;
      }
      ++causes[to_string(sp->cause)];
      ++at[sp->stop];
    }
    json c;
    for (const char* k : {"horizon", "tau", "tm", "s2", "frozen"}) c[k] = causes[k];
    return json{{"causes", c}, {"stop_step", at}, {"excluded", excluded}};
  };
  const auto drift = [&](const StopRule& rule, Field f, double m, Drift dir) {
    std::vector<std::vector<double>> paths;
    for (const auto& tr : ensemble)
      if (const auto sp = stop_point(tr, rule))
        paths.push_back(stopped_values(tr, f, m, *sp, length));
    if (paths.size() < 2) return json{{"error", "fewer than two stopped paths"}};
    return drift_json(drift_test(paths, dir), dir);
  };

  json tails = json::array(), emax = json::array(), hist = json::array(),
       drifts = json::array();
  for (double m : cfg.m_levels) {
    const StopRule rule = stable_rule(m);
    json t = {{"m", m}, {"epsilon", cfg.epsilon}};
    for (auto [key, stat] : {std::pair{"max_deviation", TailStatistic::MaxDeviation},
                             std::pair{"sqrt_qv", TailStatistic::SqrtQV}}) {
      try {
        const auto r = empirical_tail_probability(ensemble, stat, cfg.epsilon, m, rule);
        if (r.verdict == BoundVerdict::Violated) out.any_violated = true;
        t[key] = to_json(r);
      } catch (const ModelError& e) {
        t[key] = error_json(e);
      }
    }
    tails.push_back(t);

    json e = {{"m", m}};
    try {
      const auto r = expected_max_report(ensemble, m, rule);
      if (r.verdict == BoundVerdict::Violated) out.any_violated = true;
      e["report"] = to_json(r);
    } catch (const ModelError& err) {
      e["report"] = error_json(err);
    }
    emax.push_back(e);

    hist.push_back({{"m", m}, {"histogram", histogram(rule)}});
    drifts.push_back({{"m", m},
                      {"Z", drift(rule, Field::Z, m, Drift::Super)},
                      {"calL", drift(rule, Field::calL, m, Drift::Sub)},
                      {"abs_deviation", drift(rule, Field::AbsDeviation, m, Drift::Sub)}});
  }
  j["tail_reports"] = tails;
  j["expected_max"] = emax;
  j["stop_histograms"] = {{"stable", hist}, {"deleveraging", histogram(deleveraging_rule())}};
  j["drift"] = {
      {"stable", drifts},
      {"deleveraging",
       {{"Z", drift(deleveraging_rule(), Field::Z, 1.0, Drift::Sub)},
        {"calL", drift(deleveraging_rule(), Field::calL, 1.0, Drift::Super)}}}};

  try {
    const auto v = variance_approximation(s0, schedule.at(0), cfg.params);
    j["variance_approximation"] = {{"h_prime", jnum(v.h_prime)},
                                   {"e_calL", jnum(v.e_calL)},
                                   {"var_R", jnum(v.var_R)},
                                   {"delta_method", jnum(v.delta_method)},
                                   {"as_written", jnum(v.as_written)}};
  } catch (const ModelError& e) {
    j["variance_approximation"] = error_json(e);
  }

  if (cfg.regime_compare) {
    const auto& rc = *cfg.regime_compare;
    SystemState s = s0;
    s.N *= rc.nbar_ratio;
    s.Nbar *= rc.nbar_ratio;
    try {
      const auto r = regime_variance_compare(s, s0, schedule.at(0), cfg.params, rc.draws,
                                             cfg.seed, rc.margin);
      j["regime_compare"] = {{"nbar_ratio", rc.nbar_ratio},
                             {"var_s", r.var_s},
                             {"var_u", r.var_u},
                             {"se_diff", r.se_diff},
                             {"n", r.n}};
    } catch (const ModelError& e) {
      j["regime_compare"] = error_json(e);
    }
  } else {
    j["regime_compare"] = nullptr;
  }

  std::int64_t partial = 0, wipeouts = 0, fallbacks = 0, detector_missing = 0;
  std::map<std::string, std::int64_t> halts, bindings;
  for (const auto& tr : ensemble) {
    for (std::size_t k = 0; k < tr.events.size(); ++k) {
      const auto& ev = tr.events[k];
      if (ev.liquidation.kind == LiquidationKind::Partial) ++partial;
      if (ev.liquidation.kind == LiquidationKind::Wipeout) ++wipeouts;
      if (ev.fallback) ++fallbacks;
      if (ev.halt_kind) ++halts[to_string(*ev.halt_kind)];
      if (k > 0 && !tr.states[k].frozen()) ++bindings[to_string(ev.binding)];
      const bool due = cfg.detector_every > 0 && k % cfg.detector_every == 0;
      if (due && !tr.states[k].frozen() && !ev.detector_available) ++detector_missing;
    }
  }
  j["events"] = {{"partial_liquidations", partial},
                 {"wipeouts", wipeouts},
                 {"halts", halts},
                 {"bindings", bindings},
                 {"fallbacks", fallbacks},
                 {"detector_unavailable", detector_missing}};
  j["any_violated"] = out.any_violated;
  out.json = j.dump(2) + "\n";
  return out;
}

PlotSeries plot_series(const RunConfig& cfg, const std::vector<Trajectory>& ensemble) {
  PlotSeries p;
  const double m = cfg.m_levels.front();
  const StopRule rule = stable_rule(m);
  p.deviation = comment_block(cfg) + "# m: " + num(m) + "\npath,t,deviation,running_max\n";
  p.qv = comment_block(cfg) + "# m: " + num(m) + "\npath,t,qv\n";
  for (const auto& tr : ensemble) {
    const auto sp = stop_point(tr, rule);
    if (!sp) continue;
    const auto d = deviation_series(tr, m, *sp);
    double mx = 0.0, qv = 0.0;
    for (std::size_t i = 0; i < d.z_prime.size(); ++i) {
      const int t = sp->start + static_cast<int>(i);
      mx = std::max(mx, d.z_prime[i]);
      if (i > 0) {
        const double dz = d.z_prime[i] - d.z_prime[i - 1];
        qv += dz * dz;
      }
      const std::string head = std::to_string(tr.path) + ',' + std::to_string(t) + ',';
      p.deviation += head + num(d.z_prime[i]) + ',' + num(mx) + '\n';
      p.qv += head + num(qv) + '\n';
    }
  }

  static constexpr double qs[] = {0.05, 0.25, 0.5, 0.75, 0.95};
  p.fan = comment_block(cfg) + "t,q05,q25,q50,q75,q95\n";
  for (int t = 0; t <= cfg.horizon; ++t) {
    std::vector<double> z;
    for (const auto& tr : ensemble)
      if (t < static_cast<int>(tr.states.size()) && std::isfinite(tr.states[t].Z))
        z.push_back(tr.states[t].Z);
    if (z.empty()) continue;
    std::sort(z.begin(), z.end());
    p.fan += std::to_string(t);
    for (double q : qs) p.fan += ',' + num(quantile_sorted(z, q));
    p.fan += '\n';
  }
  return p;
}

RunOutcome run(const RunConfig& cfg, unsigned threads) {
  const auto ensemble = run_ensemble(cfg, threads);
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  RunOutcome out;
  const auto emit = [&](const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    out.written.push_back((dir / name).string());
  };
  if (cfg.write_trajectories) emit("trajectories.csv", trajectories_csv(cfg, ensemble));
  const Report rep = build_report(cfg, ensemble);
  emit("report.json", rep.json);
  if (cfg.write_plots) {
    const auto p = plot_series(cfg, ensemble);
    emit("plot_deviation.csv", p.deviation);
    emit("plot_qv.csv", p.qv);
    emit("plot_fan.csv", p.fan);
  }
  out.any_violated = rep.any_violated;
  out.exit_code = cfg.strict && rep.any_violated ? 2 : 0;
  return out;
}

ReplayResult replay(const std::string& trajectories, const RunConfig& cfg,
                    const std::optional<std::string>& reference) {
  constexpr double tol = 1e-12;
  const Table t = parse_table(trajectories);
  const SystemParams& p = cfg.params;
  const auto c_path = t.col("path"), c_t = t.col("t"), c_X = t.col("X"), c_L = t.col("L"),
             c_calL = t.col("calL"), c_N = t.col("N"), c_Nbar = t.col("Nbar"),
             c_Z = t.col("Z"), c_Y = t.col("Y"), c_state = t.col("state"),
             c_liq = t.col("liquidation"), c_ell = t.col("ell"), c_tau = t.col("tau"),
             c_s1 = t.col("s1"), c_s2 = t.col("s2"), c_einv = t.col("e_inv_L"),
             c_eL = t.col("e_L"), c_eZ = t.col("e_Z");
  std::vector<std::size_t> c_tm;
  for (std::size_t i = 0; i < cfg.m_levels.size(); ++i)
    c_tm.push_back(t.col("tm_" + std::to_string(i)));

  ReplayResult res;
  const auto mismatch = [&](std::size_t row, const std::string& what) {
    res.ok = false;
    res.mismatch_row = static_cast<std::int64_t>(row);
    res.message = "row " + std::to_string(row) + ": " + what;
    return res;
  };

  SystemState prev;
  bool s1_seen = false;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    SystemState s;
    std::uint64_t path = 0;
    try {
      path = std::stoull(row[c_path]);
      s.t = std::stoi(row[c_t]);
      s.X = parse_double(row[c_X]);
      s.L = parse_double(row[c_L]);
      s.calL = parse_double(row[c_calL]);
      s.N = parse_double(row[c_N]);
      s.Nbar = parse_double(row[c_Nbar]);
      s.Z = parse_double(row[c_Z]);
      s.Y = parse_double(row[c_Y]);
    } catch (const std::exception& e) {
      return mismatch(r, e.what());
    }
    (void)path;
    s.wiped_out = row[c_state] == "wiped-out";
    s.halted = row[c_state] == "halted";
    const std::string& liq = row[c_liq];

    const auto same = [&](double a, double b, const char* name) -> std::optional<std::string> {
      if (close(a, b, tol)) return std::nullopt;
      return std::string(name) + " is " + num(a) + ", expected " + num(b);
    };
    std::optional<std::string> bad;
    const auto check = [&](double a, double b, const char* name) {
      if (!bad) bad = same(a, b, name);
    };

    if (s.t == 0) {
      s1_seen = false;
      check(s.calL, p.zeta + s.L, "calL");
      check(s.Z, clearing_price(s.calL, p), "Z");
      if (!bad && liq != "none") bad = "initial row has liquidation " + liq;
    } else if (prev.frozen()) {
      check(s.X, prev.X, "X");
      check(s.L, prev.L, "L");
      check(s.calL, prev.calL, "calL");
      check(s.N, prev.N, "N");
      check(s.Nbar, prev.Nbar, "Nbar");
      check(s.Z, prev.Z, "Z");
      check(s.Y, prev.Y, "Y");
      if (!bad && (s.wiped_out != prev.wiped_out || s.halted != prev.halted))
        bad = "frozen state changed";
    } else {
      std::pair<SystemState, LiquidationOutcome> post;
      try {
        post = apply_liquidation(prev, s.X, p);
      } catch (const ModelError& e) {
        return mismatch(r, std::string("liquidation recomputation failed: ") + e.what());
      }
      const auto& [ps, lo] = post;
      if (liq != to_string(lo.kind))
        bad = "liquidation is " + liq + ", expected " + to_string(lo.kind);
      check(parse_double(row[c_ell]), lo.ell, "ell");
      check(s.Y, ps.Y, "Y");
      if (!bad && s.wiped_out != ps.wiped_out) bad = "wipeout flag disagrees";
      if (s.frozen()) {
        check(s.L, ps.L, "L");
        check(s.calL, ps.calL, "calL");
        check(s.N, ps.N, "N");
        check(s.Nbar, ps.Nbar, "Nbar");
        check(s.Z, ps.Z, "Z");
      } else {
        check(s.calL, p.zeta + s.L, "calL");
        check(s.Z, clearing_price(s.calL, p), "Z");
        check(s.N, ps.N + (s.L - ps.L) * s.Z / s.X, "N");
        check(s.Nbar, p.collateral_mode == CollateralMode::Lagged ? ps.N : s.N, "Nbar");
      }
    }
    if (bad) return mismatch(r, *bad);

    std::optional<ConditionalExpectations> cond;
    if (!row[c_einv].empty()) {
      try {
        cond = ConditionalExpectations{parse_double(row[c_einv]), parse_double(row[c_eL]),
                                       parse_double(row[c_eZ])};
      } catch (const std::exception& e) {
        return mismatch(r, e.what());
      }
    }
    Stops st;
    try {
      st = detect_stops(s, cond, cfg.m_levels, s1_seen);
    } catch (const std::exception& e) {
      return mismatch(r, e.what());
    }
    const auto flag = [&](std::size_t c, bool expect, const std::string& name) {
      if (!bad && row[c] != (expect ? "1" : "0"))
        bad = name + " flag is " + row[c] + ", expected " + (expect ? "1" : "0");
    };
    flag(c_tau, st.tau, "tau");
    flag(c_s1, st.s1, "s1");
    flag(c_s2, st.s2, "s2");
    for (std::size_t i = 0; i < c_tm.size(); ++i)
      flag(c_tm[i], st.tm[i], "tm_" + std::to_string(i));
    if (bad) return mismatch(r, *bad);
    if (st.s1) s1_seen = true;
    prev = s;
    ++res.rows_checked;
  }

  if (reference) {
    const Table ref = parse_table(*reference);
    if (ref.rows.size() != t.rows.size())
      return mismatch(std::min(ref.rows.size(), t.rows.size()),
                      "reference has " + std::to_string(ref.rows.size()) + " rows, run has " +
                          std::to_string(t.rows.size()));
    const auto r_path = ref.col("path"), r_t = ref.col("t"), r_Z = ref.col("Z");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (ref.rows[r][r_path] != t.rows[r][c_path] || ref.rows[r][r_t] != t.rows[r][c_t])
        return mismatch(r, "reference row is for a different (path, t)");
      const double a = parse_double(t.rows[r][c_Z]), b = parse_double(ref.rows[r][r_Z]);
      if (!close(a, b, 1e-8))
        return mismatch(r, "Z is " + num(a) + ", reference has " + num(b));
    }
  }
  res.message = "ok: " + std::to_string(res.rows_checked) + " rows verified";
  return res;
}

}  // namespace stblsim
