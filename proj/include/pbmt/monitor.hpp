#pragma once

#include "pbmt/sim.hpp"
#include "pbmt/stl.hpp"

namespace pbmt {

struct Robustness {
  double value = 0.0;
  int evaluated_at = 0;
  // A bounded window fell entirely past the trace end somewhere in the
  // evaluation; the affected operator was treated as vacuous (+inf for
  // always, -inf for eventually/until).
  bool vacuous_window = false;
};

// Quantitative robustness at sample 0. Positive implies satisfaction,
// negative implies violation; exactly zero is inconclusive. Interval bounds
// in seconds map to sample indices by round-half-up on bound/sample_time;
// bounded windows truncate at the trace end.
Robustness robustness(const Trace& trace, const StlFormula& phi, const SimConfig& cfg);

// Boolean satisfaction at sample 0, evaluated by direct induction on the
// formula; deliberately independent of the robustness path.
bool boolean_sat(const Trace& trace, const StlFormula& phi, const SimConfig& cfg);

// Instantaneous Boolean value of one atomic predicate at every sample
// (used for plot annotations).
std::vector<char> predicate_profile(const Trace& trace, const StlPredicate& pred);

}  // namespace pbmt
