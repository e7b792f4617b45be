#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbmt/monitor.hpp"
#include "pbmt/mutation.hpp"

namespace pbmt {

struct KillVerdict {
  bool weak = false;    // mutated signal differs somewhere beyond tol
  bool strong = false;  // some model output differs beyond tol
  bool phi = false;     // rho_orig > 0 and rho_mut < 0
  double rho_orig = 0.0;
  double rho_mut = 0.0;
  bool sim_failed = false;  // the mutant run aborted (non-finite signal)
  std::uint64_t output_digest = 0;  // hash of mutant output signals
};

enum class MutantLabel { NtdPhi, PhiTriviallyDifferent, Equivalent, Invalid };
enum class LabelProvenance { Kill, Oracle, SbtgExhausted, Assumed, Manual };

const char* to_string(MutantLabel label);
const char* to_string(LabelProvenance prov);

struct MutantColumn {
  std::string id;
  MutationOp op = MutationOp::Negate;
  MutantLabel label = MutantLabel::NtdPhi;
  LabelProvenance provenance = LabelProvenance::Assumed;
  std::string note;
};

// phi-trivially different mutants include the equivalent ones.
inline bool is_phi_trivially_different(MutantLabel label) {
  return label == MutantLabel::Equivalent || label == MutantLabel::PhiTriviallyDifferent;
}

struct KillMatrix {
  std::vector<std::string> test_ids;   // rows
  std::vector<MutantColumn> mutants;   // columns
  std::vector<KillVerdict> cells;      // row-major

  int tests() const { return static_cast<int>(test_ids.size()); }
  int cols() const { return static_cast<int>(mutants.size()); }
  KillVerdict& cell(int test, int mutant) {
    return cells[static_cast<std::size_t>(test) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(mutant)];
  }
  const KillVerdict& cell(int test, int mutant) const {
    return cells[static_cast<std::size_t>(test) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(mutant)];
  }
  void resize_cells() { cells.assign(static_cast<std::size_t>(tests()) * static_cast<std::size_t>(cols()), {}); }
};

// Weak/strong/phi verdict for one (test, mutant) pair from the two traces.
// `outputs` names the model output signals; tol 0 means exact inequality.
KillVerdict classify(const Trace& trace_orig, const Trace& trace_mut,
                     const std::string& mutated_signal, const std::vector<std::string>& outputs,
                     const StlFormula& phi, const SimConfig& cfg, double tol);

// Digest of the named signals in a trace; identical digests on every test
// mark dynamic duplicates.
std::uint64_t trace_digest(const Trace& trace, const std::vector<std::string>& signals);

struct ScoreReport {
  int mutants_total = 0;  // valid + invalid descriptors
  int invalid = 0;
  int valid = 0;
  int equivalent = 0;
  int killable = 0;      // valid - equivalent
  int killed = 0;        // strongly killed by at least one test
  int phi_killable = 0;  // non phi-trivially different (NTD count)
  int phi_killed = 0;

  double ms() const { return killable ? static_cast<double>(killed) / killable : 0.0; }
  double ms_phi() const {
    return phi_killable ? static_cast<double>(phi_killed) / phi_killable : 0.0;
  }
};

// Counts only; never throws. Ratios are meaningful only when the
// denominators are nonzero.
ScoreReport score_counts(const KillMatrix& km);

// MS = killed / (valid - equivalent); MS_phi = |KD_phi| / |NTD_phi|.
// Throws ZeroDenominator when either denominator is empty.
ScoreReport mutation_score(const KillMatrix& km);

// Percentages formatted the way the tables in the literature print them:
// truncated (not rounded) to two decimals, e.g. 74/83 -> "89.15".
std::string format_percent(double ratio);

// Row-filtered view for per-strategy scoring.
KillMatrix filter_tests(const KillMatrix& km, const std::vector<std::string>& test_ids);

struct SubsumptionReport {
  std::vector<std::vector<int>> duplicate_groups;     // mutant indices, size >= 2
  std::vector<std::pair<int, int>> subsumes;          // (i, j): mutant i subsumes j
};

// Dynamic (executed-suite) approximation of duplicate and subsumed mutants
// over the phi-kill columns.
SubsumptionReport dynamic_subsumption(const KillMatrix& km);

// Greedy phi-kill-preserving reduction; returns test ids in pick order.
std::vector<std::string> greedy_reduce(const KillMatrix& km);

// Same algorithm over strong kills; reported alongside the phi-based
// reduction since suites compress differently under the two verdicts.
std::vector<std::string> greedy_reduce_strong(const KillMatrix& km);

// Kill matrix CSV: header row of mutant ids, label row, then one row per
// test with cells "WSP;rho_orig;rho_mut" ("-" for unset flags).
std::string kill_matrix_to_csv(const KillMatrix& km);
KillMatrix kill_matrix_from_csv(const std::string& csv);

}  // namespace pbmt
