#pragma once

#include <string>
#include <vector>

#include "stblsim/quadrature.hpp"
#include "stblsim/return_model.hpp"
#include "stblsim/types.hpp"

namespace stblsim {

enum class Verdict { Holds, Fails, HoldsNumericallyOnGrid, NotApplicable };
const char* to_string(Verdict v);

struct AssumptionCheck {
  int id = 0;
  std::string name;
  Verdict verdict = Verdict::NotApplicable;
  /// The evaluated quantity and the level it is compared against.
  double value = NAN;
  double threshold = NAN;
  /// Assumption 8 only: the direct inequality, reported beside the verdict
  /// keyed to the sufficient supply condition.
  double direct_value = NAN;
  Verdict direct_verdict = Verdict::NotApplicable;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck& get(int id) const;
  /// True when no check fails. Grid-based verdicts count as holding.
  bool all_hold() const;
  bool holds(int id) const;
};

/// Evaluates assumptions 1 through 11 at a post-decision state: L and Nbar
/// are the liabilities and collateral at stake for the next step, X the
/// current price, and `model` the next step's return law.
AssumptionReport check_assumptions(const ReturnModel& model,
                                   const SystemState& state,
                                   const SystemParams& params,
                                   const QuadratureSpec& spec = {});

}  // namespace stblsim
