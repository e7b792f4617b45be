#pragma once

#include <functional>
#include <optional>

#include "pbmt/monitor.hpp"
#include "pbmt/mutation.hpp"
#include "pbmt/rng.hpp"
#include "pbmt/sim.hpp"

namespace pbmt {

struct SearchBudget {
  int population_size = 20;
  int max_iterations = 100;
  std::optional<double> wall_clock_limit;  // seconds; unset = iterations only
  std::uint64_t seed = 0;
};

struct FitnessBreakdown {
  double distance = 0.0;
  double rho_orig = 0.0;
  double rho_mut = 0.0;
  double penalized_value = 0.0;
  bool feasible = false;    // rho_orig > 0 and rho_mut < 0
  bool sim_failed = false;  // a run aborted non-finite; scored -inf
};

// Scalar penalty weights for the constrained search. Defaults scale with
// the model's input ranges; the barrier puts every infeasible point below
// every feasible one.
struct PenaltyWeights {
  double w1 = 100.0;
  double w2 = 100.0;
  double barrier = 1e9;

  // w1 = w2 = 100 * max input range diameter.
  static PenaltyWeights defaults_for(const Model& model);
};

// Maximize D(s, s') subject to rho_orig > 0 and rho_mut < 0, folded into
// penalized_value = D - w1*max(0,-rho_orig) - w2*max(0,rho_mut) - B*[infeasible].
FitnessBreakdown fitness(const TestCase& t, const Model& m, const MutantModel& mut,
                         const StlFormula& phi, const SimConfig& cfg, const PenaltyWeights& w);

// Hot-path variant against pre-compiled simulators.
FitnessBreakdown fitness(const TestCase& t, const Simulator& orig, const Simulator& mut,
                         const std::string& mutated_signal, const StlFormula& phi,
                         const PenaltyWeights& w);

// Population update hook: candidate plus context -> new position (clipped
// to the input box by the caller).
struct UpdateContext {
  const Eigen::VectorXd& best;
  const Eigen::VectorXd& peer1;
  const Eigen::VectorXd& peer2;
  const Eigen::VectorXd& lo;  // per-dimension input box
  const Eigen::VectorXd& hi;
  rng::Stream& stream;
};
using UpdateRule =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& candidate, UpdateContext& ctx)>;

// Drift toward the best plus differential perturbation (F = 0.5), with
// per-dimension uniform resampling at rate 0.1.
UpdateRule default_update_rule();

struct SearchLog {
  std::vector<double> best_by_iteration;  // entry 0 = initial population
  int evaluations = 0;
};

struct SbtgResult {
  std::optional<TestCase> test;  // set iff both constraints hold
  FitnessBreakdown best;
  SearchLog log;
};

// Search-based phi-kill generation: population search over the test input
// box, stopping at the first feasible candidate or on budget exhaustion.
SbtgResult sbtg(const Model& m, const MutantModel& mut, const StlFormula& phi, const SimConfig& cfg,
                int q_t, const SearchBudget& budget, const PenaltyWeights* weights = nullptr,
                const UpdateRule* rule = nullptr);

// Adaptive random testing with a fixed-size candidate set: each new test
// maximizes, among `candidates_per_pick` random candidates, the minimum
// normalized Euclidean distance to the already-selected tests.
std::vector<TestCase> art_generate(const Model& m, const SimConfig& cfg, int n,
                                   int candidates_per_pick, std::uint64_t seed, int q_t);

// Falsification: minimize rho(O(t, M'), phi); first test with rho < 0 wins.
std::optional<TestCase> falsify(const MutantModel& mut, const StlFormula& phi, const SimConfig& cfg,
                                int q_t, const SearchBudget& budget);

struct GridSpec {
  int q_t = 1;
  std::vector<std::vector<double>> levels;  // explicit level values per input
  std::size_t cap = 1000000;                // enumeration bound
};

// Uniformly spaced levels over each input range (single level = midpoint).
GridSpec uniform_grid(const Model& model, int q_t, int levels_per_input);

struct BruteForceResult {
  bool killable = false;  // killable-on-grid
  std::optional<TestCase> witness;
  long tested = 0;
};

// Exhaustive phi-killability oracle over the finite grid only. Throws
// GridTooLarge past the cap.
BruteForceResult brute_force_phi_killable(const Model& m, const MutantModel& mut,
                                          const StlFormula& phi, const SimConfig& cfg,
                                          const GridSpec& grid);

// Test suite JSON (schema pbmt-suite/1).
struct SuiteEntry {
  std::string id;
  std::string strategy;       // art | ft | sbtg | oracle | manual
  std::string target_mutant;  // empty when untargeted
  std::uint64_t seed = 0;     // generator seed that produced this test
  TestCase test;
};
std::string suite_to_json(const std::vector<SuiteEntry>& suite,
                          const std::vector<std::string>& input_names, int q_t);
std::vector<SuiteEntry> suite_from_json(const std::string& json_text,
                                        const std::vector<std::string>& input_names);

}  // namespace pbmt
