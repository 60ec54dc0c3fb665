#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stblsim/optimizer.hpp"
#include "stblsim/quadrature.hpp"
#include "stblsim/return_model.hpp"
#include "stblsim/rng.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

/// Return law per step. `at(t)` is the law of R_{t+1}; switches take effect
/// from their step onward.
class ReturnSchedule {
 public:
  ReturnSchedule() = default;
  explicit ReturnSchedule(ReturnModel base) : base_(std::move(base)) {}

  void add_switch(int from_step, ReturnModel model);
  const ReturnModel& at(int t) const;
  const ReturnModel& base() const { return base_; }
  const std::vector<std::pair<int, ReturnModel>>& switches() const {
    return switches_;
  }

 private:
  ReturnModel base_;
  std::vector<std::pair<int, ReturnModel>> switches_;
};

struct ConditionalExpectations {
  double e_inv_L = NAN;
  double e_L = NAN;
  double e_Z = NAN;
};

struct Stops {
  bool tau = false;
  bool s1 = false;
  bool s2 = false;
  /// One flag per entry of the configured m levels.
  std::vector<bool> tm;
};

/// What happened on the transition into a state, plus the stops detected
/// at that state.
struct StepEvents {
  LiquidationOutcome liquidation;
  bool constraint_binding = false;
  Binding binding = Binding::Interior;
  bool fallback = false;
  Stops stops;
  bool detector_available = false;
  ConditionalExpectations cond;
  std::optional<ErrorKind> halt_kind;
  std::string halt_reason;
};

struct DetectorOptions {
  /// Gauss-Legendre nodes per probability region.
  int nodes = 8;
  /// Regions with less probability than this are dropped and the rest
  /// renormalized.
  double min_region_mass = 1e-12;
  QuadratureSpec spec;
};

struct SimOptions {
  int horizon = 1;
  /// Run the detectors at every k-th state; 0 disables them.
  int detector_every = 1;
  std::vector<double> m_levels{1.0};
  DetectorOptions detector;
  QuadratureSpec spec;
};

struct Trajectory {
  std::vector<SystemState> states;
  std::vector<StepEvents> events;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  SystemParams params;
  /// E[1/calL_1 | F_0] <= 1/calL_0, when the detector could evaluate it.
  std::optional<bool> initial_condition;
};

/// State with calL, Z, Y filled in from the primitives. Nbar defaults to N.
SystemState initial_state(const SystemParams& params, double X0, double L0,
                          double N0);

/// One transition: draw R from `draw_model`, liquidate, then choose L with
/// `decide_model` as the law of the following return. Solver and balance
/// sheet failures freeze the state and are recorded in the events.
std::pair<SystemState, StepEvents> step(const SystemState& state,
                                        const ReturnModel& draw_model,
                                        const ReturnModel& decide_model,
                                        const SystemParams& params, Rng& rng,
                                        const QuadratureSpec& spec = {});
std::pair<SystemState, StepEvents> step(const SystemState& state,
                                        const ReturnModel& model,
                                        const SystemParams& params, Rng& rng);

/// Transition for a given return realization; the deterministic core of
/// `step`.
std::pair<SystemState, StepEvents> transition(const SystemState& state,
                                              double R,
                                              const ReturnModel& decide_model,
                                              const SystemParams& params,
                                              const QuadratureSpec& spec = {});

/// E[1/calL_{t+1}], E[calL_{t+1}], E[Z_{t+1}] given F_t, integrating the
/// next decision over the return law in probability space. Throws
/// DetectorUnavailable when a nested decision fails.
ConditionalExpectations conditional_next(const SystemState& state,
                                         const ReturnModel& draw_model,
                                         const ReturnModel& decide_model,
                                         const SystemParams& params,
                                         const DetectorOptions& opts = {});

Stops detect_stops(const SystemState& state,
                   const std::optional<ConditionalExpectations>& cond,
                   const std::vector<double>& m_levels, bool s1_seen);

Trajectory simulate(const SystemState& initial, const ReturnSchedule& schedule,
                    const SystemParams& params, const SimOptions& opts,
                    Rng& rng);

}  // namespace stblsim
