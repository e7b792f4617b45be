#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pbmt/model.hpp"
#include "pbmt/sim.hpp"

namespace pbmt {

// Operator catalog. The first seven act on lines, the rest rewrite blocks.
enum class MutationOp {
  Noise,
  Bias,
  Negate,
  Absolute,
  StuckAt,
  TimeDelay,
  PackageDrop,
  Ror,               // Relational operator replacement
  Lor,               // Logical operator replacement
  S2p,               // Sum -> Product
  P2s,               // Product -> Sum
  Asr,               // flip one Sum sign
  LutStuckAtZero,    // one table entry := 0
  LutSwapNeighbors,  // swap adjacent table entries
};

bool is_line_operator(MutationOp op);
const char* to_string(MutationOp op);
MutationOp mutation_op_from_string(const std::string& name);  // throws Error
std::vector<MutationOp> all_mutation_ops();

// (operator, site, params, seed) reconstructs the mutant exactly. Only the
// fields meaningful for `op` are set.
struct MutantDescriptor {
  std::string id;
  MutationOp op = MutationOp::Negate;
  std::string site;  // line id or block id

  double number = 0.0;             // sigma / offset / stuck value / drop prob
  int index = 0;                   // delay samples, sign flip, LUT entry
  RelOp rel_to = RelOp::Lt;        // Ror replacement
  LogicOp logic_to = LogicOp::And; // Lor replacement
  std::uint64_t seed = 0;          // stochastic operators

  bool operator==(const MutantDescriptor&) const = default;
};

struct MutantModel {
  MutantDescriptor descriptor;
  Model model;
  // Line id of s': the mutated line, or the first line leaving a mutated
  // block's output port. Present in every simulation trace.
  std::string mutated_signal;
};

// One generation outcome; invalid mutants carry the rejecting diagnostics
// and are excluded from score denominators.
struct MutantRecord {
  MutantDescriptor descriptor;
  std::string mutated_signal;
  bool valid = true;
  std::vector<Diagnostic> diagnostics;
};

// Documented defaults for drawn parameters; the paper's fault magnitudes are
// unpublished, so these are configurable knobs.
struct MutationDefaults {
  double bias_rel = 0.10;   // offset ~ U(-r, r), r = rel * nominal amplitude
  double noise_rel = 0.05;  // sigma = rel * nominal amplitude
  std::vector<int> time_delays = {5, 25};
  double drop_prob = 0.1;
};

// All compatible (operator, site) pairs in deterministic order: operators in
// catalog order, sites in model declaration order. Line operators list every
// line; block operators list every block of the right kind that has an
// outgoing line and at least one effective rewrite.
std::vector<std::pair<MutationOp, std::string>> enumerate_sites(
    const Model& model, const std::vector<MutationOp>& ops);

// Pure function of (model, descriptor); throws IncompatibleSite.
MutantModel apply_mutation(const Model& model, const MutantDescriptor& d);

struct GeneratedMutants {
  std::vector<MutantModel> mutants;   // valid only
  std::vector<MutantRecord> records;  // every descriptor, including invalid
};

// One mutant per enumerated site, parameters drawn deterministically from
// master_seed. Magnitudes are scaled by each site's nominal amplitude,
// probed with one mid-range simulation under `cfg`.
GeneratedMutants generate_mutants(const Model& model, const std::vector<MutationOp>& ops,
                                  std::uint64_t master_seed, const SimConfig& cfg,
                                  const MutationDefaults& defaults = {});

// Mutant manifest (JSON): descriptor list sufficient to regenerate every
// mutant bit-exactly via apply_mutation.
std::string manifest_to_json(const GeneratedMutants& generated, const std::string& model_name,
                             std::uint64_t master_seed);
std::vector<MutantRecord> manifest_from_json(const std::string& json_text);
void write_manifest(const GeneratedMutants& generated, const std::string& model_name,
                    std::uint64_t master_seed, const std::string& path);
std::vector<MutantRecord> read_manifest(const std::string& path);

}  // namespace pbmt
