#include "stblsim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace stblsim {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ModelError(ErrorKind::Config, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, type-checking each requested key and rejecting
// any key nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(path(key), "expected a number");
      out = v->get<double>();
    }
  }

  // Also accepts "inf" for unbounded limits.
  void extended(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_string() && v->get<std::string>() == "inf") {
        out = kInf;
        return;
      }
      if (!v->is_number()) fail(path(key), "expected a number or \"inf\"");
      out = v->get<double>();
    }
  }

  template <class I>
  void integer(const std::string& key, I& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<I>) {
        if (!v->is_number_unsigned()) fail(path(key), "expected a non-negative integer");
        out = v->get<I>();
      } else {
        out = static_cast<I>(v->get<std::int64_t>());
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(path(key), "expected an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number())
          fail(path(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  template <class E>
  void choice(const std::string& key, E& out,
              std::initializer_list<std::pair<const char*, E>> names) {
    if (const json* v = find(key)) {
      std::string allowed;
      if (v->is_string()) {
        for (const auto& [name, value] : names) {
          if (v->get<std::string>() == name) {
            out = value;
            return;
          }
        }
      }
      for (const auto& [name, value] : names)
        allowed += (allowed.empty() ? "" : ", ") + std::string(name);
      fail(path(key), "expected one of " + allowed);
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(path(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::initializer_list<std::pair<const char*, DemandMode>> kDemand{
    {"unit-elastic", DemandMode::UnitElastic},
    {"perfectly-elastic", DemandMode::PerfectlyElastic},
    {"constant-elasticity", DemandMode::ConstantElasticity}};
const std::initializer_list<std::pair<const char*, SpeculatorMode>> kSpeculator{
    {"single", SpeculatorMode::Single},
    {"unlimited-depth", SpeculatorMode::UnlimitedDepth}};
const std::initializer_list<std::pair<const char*, CollateralMode>> kCollateral{
    {"lagged", CollateralMode::Lagged}, {"concurrent", CollateralMode::Concurrent}};

template <class E>
const char* name_of(E value, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, v] : names)
    if (v == value) return n;
  return "unknown";
}

ReturnSpec parse_returns(const json& j, const std::string& path) {
  Reader r(j, path);
  std::string kind = "lognormal";
  r.string("kind", kind);
  ReturnSpec spec;
  if (kind == "lognormal") {
    Lognormal s;
    r.number("mu", s.mu);
    r.number("sigma", s.sigma);
    spec = s;
  } else if (kind == "uniform") {
    UniformInterval s;
    r.number("lo", s.lo);
    r.number("hi", s.hi);
    spec = s;
  } else if (kind == "empirical") {
    EmpiricalKernel s;
    r.numbers("log_returns", s.log_returns);
    r.number("bandwidth", s.bandwidth);
    std::sort(s.log_returns.begin(), s.log_returns.end());
    spec = s;
  } else {
    fail(r.path("kind"), "expected one of lognormal, uniform, empirical");
  }
  r.finish();
  try {
    ReturnModel model(spec);
  } catch (const ModelError& e) {
    std::string what = e.what();
    const std::string prefix = "return_model.";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    throw ModelError(ErrorKind::Config, path + "." + what);
  }
  return spec;
}

json returns_json(const ReturnSpec& spec) {
  json j;
  if (const auto* s = std::get_if<Lognormal>(&spec)) {
    j["kind"] = "lognormal";
    j["mu"] = s->mu;
    j["sigma"] = s->sigma;
  } else if (const auto* s = std::get_if<UniformInterval>(&spec)) {
    j["kind"] = "uniform";
    j["lo"] = s->lo;
    j["hi"] = s->hi;
  } else {
    const auto& e = std::get<EmpiricalKernel>(spec);
    j["kind"] = "empirical";
    j["log_returns"] = e.log_returns;
    j["bandwidth"] = e.bandwidth;
  }
  return j;
}

json extended_json(double x) {
  if (std::isinf(x) && x > 0) return "inf";
  return x;
}

}  // namespace

void RunConfig::validate() const {
  try {
    params.validate();
  } catch (const ModelError& e) {
    throw ModelError(ErrorKind::Config, std::string("params.") + e.what());
  }
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) fail(key, std::string("must satisfy ") + what);
  };
  require(initial.X > 0.0, "initial.X", "X > 0");
  require(initial.L >= 0.0, "initial.L", "L >= 0");
  require(initial.N >= 0.0, "initial.N", "N >= 0");
  require(!initial.Nbar || *initial.Nbar >= 0.0, "initial.Nbar", "Nbar >= 0");
  require(params.zeta + initial.L >= params.v_floor, "initial.L",
          "zeta + L >= v_floor");
  require(horizon >= 1, "run.horizon", "horizon >= 1");
  require(n_paths >= 1, "run.paths", "paths >= 1");
  require(detector_every >= 0, "run.detector_every", "detector_every >= 0");
  require(detector_nodes >= 1 && detector_nodes <= 64, "run.detector_nodes",
          "1 <= detector_nodes <= 64");
  require(!m_levels.empty(), "run.m_levels", "at least one level");
  for (double m : m_levels) require(m > 0.0, "run.m_levels", "every m > 0");
  require(epsilon > 0.0, "run.epsilon", "epsilon > 0");
  for (const auto& e : schedule)
    require(e.from_step >= 0, "schedule.from_step", "from_step >= 0");
  if (regime_compare) {
    require(regime_compare->nbar_ratio > 0.0, "report.regime_compare.nbar_ratio",
            "nbar_ratio > 0");
    require(regime_compare->draws >= 2, "report.regime_compare.draws", "draws >= 2");
    require(regime_compare->margin >= 0.0, "report.regime_compare.margin",
            "margin >= 0");
  }
}

ReturnSchedule RunConfig::schedule_models() const {
  ReturnSchedule s{ReturnModel(returns)};
  for (const auto& e : schedule) s.add_switch(e.from_step, ReturnModel(e.returns));
  return s;
}

SystemState RunConfig::initial_state() const {
  SystemState s = stblsim::initial_state(params, initial.X, initial.L, initial.N);
  if (initial.Nbar) s.Nbar = *initial.Nbar;
  return s;
}

SimOptions RunConfig::sim_options() const {
  SimOptions o;
  o.horizon = horizon;
  o.detector_every = detector_every;
  o.detector.nodes = detector_nodes;
  o.m_levels = m_levels;
  return o;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("config", std::string("malformed JSON: ") + e.what());
  }
  RunConfig c;
  Reader root(j, "");

  if (const json* p = root.find("params")) {
    Reader r(*p, "params");
    SystemParams& s = c.params;
    r.number("demand_D", s.demand_D);
    r.number("beta", s.beta);
    r.number("alpha", s.alpha);
    r.number("zeta", s.zeta);
    r.number("kappa", s.kappa);
    r.number("r_bound", s.r_bound);
    r.extended("u_bound", s.u_bound);
    r.number("v_floor", s.v_floor);
    r.number("elasticity_gamma", s.elasticity_gamma);
    r.number("q_unit", s.q_unit);
    r.choice("demand_mode", s.demand_mode, kDemand);
    r.choice("speculator_mode", s.speculator_mode, kSpeculator);
    r.choice("collateral_mode", s.collateral_mode, kCollateral);
    r.number("gamma_marginal", s.gamma_marginal);
    r.finish();
  }
  if (const json* p = root.find("initial")) {
    Reader r(*p, "initial");
    r.number("X", c.initial.X);
    r.number("L", c.initial.L);
    r.number("N", c.initial.N);
    if (const json* nb = r.find("Nbar")) {
      if (!nb->is_null()) {
        if (!nb->is_number()) fail("initial.Nbar", "expected a number or null");
        c.initial.Nbar = nb->get<double>();
      }
    }
    r.finish();
  }
  if (const json* p = root.find("return_model")) c.returns = parse_returns(*p, "return_model");
  if (const json* p = root.find("schedule")) {
    if (!p->is_array()) fail("schedule", "expected an array");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const std::string path = "schedule[" + std::to_string(i) + "]";
      Reader r((*p)[i], path);
      ScheduleEntry e;
      r.integer("from_step", e.from_step);
      const json* m = r.find("return_model");
      if (!m) fail(path + ".return_model", "required");
      e.returns = parse_returns(*m, path + ".return_model");
      r.finish();
      c.schedule.push_back(std::move(e));
    }
  }
  if (const json* p = root.find("run")) {
    Reader r(*p, "run");
    r.integer("horizon", c.horizon);
    r.integer("paths", c.n_paths);
    r.integer("seed", c.seed);
    r.integer("detector_every", c.detector_every);
    r.integer("detector_nodes", c.detector_nodes);
    r.numbers("m_levels", c.m_levels);
    r.number("epsilon", c.epsilon);
    r.boolean("strict", c.strict);
    r.finish();
  }
  if (const json* p = root.find("output")) {
    Reader r(*p, "output");
    r.string("dir", c.output_dir);
    r.boolean("trajectories", c.write_trajectories);
    r.boolean("plots", c.write_plots);
    r.finish();
  }
  if (const json* p = root.find("report")) {
    Reader r(*p, "report");
    if (const json* rc = r.find("regime_compare")) {
      if (!rc->is_null()) {
        Reader q(*rc, "report.regime_compare");
        RegimeCompareSpec spec;
        q.number("nbar_ratio", spec.nbar_ratio);
        q.integer("draws", spec.draws);
        q.number("margin", spec.margin);
        q.finish();
        c.regime_compare = spec;
      }
    }
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  json j;
  const SystemParams& s = c.params;
  j["params"] = {{"demand_D", s.demand_D},
                 {"beta", s.beta},
                 {"alpha", s.alpha},
                 {"zeta", s.zeta},
                 {"kappa", s.kappa},
                 {"r_bound", s.r_bound},
                 {"u_bound", extended_json(s.u_bound)},
                 {"v_floor", s.v_floor},
                 {"elasticity_gamma", s.elasticity_gamma},
                 {"q_unit", s.q_unit},
                 {"demand_mode", name_of(s.demand_mode, kDemand)},
                 {"speculator_mode", name_of(s.speculator_mode, kSpeculator)},
                 {"collateral_mode", name_of(s.collateral_mode, kCollateral)},
                 {"gamma_marginal", s.gamma_marginal}};
  j["initial"] = {{"X", c.initial.X},
                  {"L", c.initial.L},
                  {"N", c.initial.N},
                  {"Nbar", c.initial.Nbar ? json(*c.initial.Nbar) : json(nullptr)}};
  j["return_model"] = returns_json(c.returns);
  j["schedule"] = json::array();
  for (const auto& e : c.schedule)
    j["schedule"].push_back(
        {{"from_step", e.from_step}, {"return_model", returns_json(e.returns)}});
  j["run"] = {{"horizon", c.horizon},
              {"paths", c.n_paths},
              {"seed", c.seed},
              {"detector_every", c.detector_every},
              {"detector_nodes", c.detector_nodes},
              {"m_levels", c.m_levels},
              {"epsilon", c.epsilon},
              {"strict", c.strict}};
  j["output"] = {{"dir", c.output_dir},
                 {"trajectories", c.write_trajectories},
                 {"plots", c.write_plots}};
  json rc = nullptr;
  if (c.regime_compare)
    rc = {{"nbar_ratio", c.regime_compare->nbar_ratio},
          {"draws", c.regime_compare->draws},
          {"margin", c.regime_compare->margin}};
  j["report"] = {{"regime_compare", rc}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& c) {
  RunConfig k = c;
  k.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : serialize_config(k)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stblsim
