#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pbmt {

struct Model;

enum class BlockKind {
  Input,
  Output,
  Constant,
  Gain,
  Sum,
  Product,
  Abs,
  UnaryMinus,
  Relational,
  Logical,
  Switch,
  Saturation,
  UnitDelay,
  DiscreteIntegrator,
  Lookup1D,
  Subsystem,
};

enum class RelOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class LogicOp { And, Or, Not };

const char* to_string(BlockKind kind);
const char* to_string(RelOp op);
const char* to_string(LogicOp op);

// Kind-specific block parameters. The variant order mirrors BlockKind.
struct InputParams {
  // Range is required for top-level model inputs, optional inside subsystems.
  bool has_range = false;
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const InputParams&) const = default;
};
struct OutputParams {
  bool operator==(const OutputParams&) const = default;
};
struct ConstantParams {
  double value = 0.0;
  bool operator==(const ConstantParams&) const = default;
};
struct GainParams {
  double factor = 1.0;
  bool operator==(const GainParams&) const = default;
};
struct SumParams {
  std::string signs;  // one of +/- per input port
  bool operator==(const SumParams&) const = default;
};
struct ProductParams {
  int arity = 2;
  bool operator==(const ProductParams&) const = default;
};
struct AbsParams {
  bool operator==(const AbsParams&) const = default;
};
struct UnaryMinusParams {
  bool operator==(const UnaryMinusParams&) const = default;
};
struct RelationalParams {
  RelOp op = RelOp::Lt;
  bool operator==(const RelationalParams&) const = default;
};
struct LogicalParams {
  LogicOp op = LogicOp::And;
  int arity = 2;  // must be 1 for Not
  bool operator==(const LogicalParams&) const = default;
};
struct SwitchParams {
  // out = in2 >= threshold ? in1 : in3
  double threshold = 0.0;
  bool operator==(const SwitchParams&) const = default;
};
struct SaturationParams {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const SaturationParams&) const = default;
};
struct UnitDelayParams {
  double init = 0.0;
  bool operator==(const UnitDelayParams&) const = default;
};
struct IntegratorParams {
  // Forward Euler: x[j+1] = x[j] + dt * u[j], output x[j].
  double init = 0.0;
  bool operator==(const IntegratorParams&) const = default;
};
struct Lookup1DParams {
  std::vector<double> breakpoints;  // strictly increasing
  std::vector<double> table;
  bool operator==(const Lookup1DParams&) const = default;
};
struct SubsystemParams {
  std::shared_ptr<const Model> inner;
  bool operator==(const SubsystemParams& other) const;
};

using BlockParams =
    std::variant<InputParams, OutputParams, ConstantParams, GainParams, SumParams, ProductParams,
                 AbsParams, UnaryMinusParams, RelationalParams, LogicalParams, SwitchParams,
                 SaturationParams, UnitDelayParams, IntegratorParams, Lookup1DParams,
                 SubsystemParams>;

struct Block {
  std::string id;
  BlockParams params;

  BlockKind kind() const { return static_cast<BlockKind>(params.index()); }
  bool operator==(const Block&) const = default;
};

struct PortRef {
  std::string block;
  std::string port;  // "in<N>" or "out<N>", 1-based

  std::string str() const { return block + "." + port; }
  bool operator==(const PortRef&) const = default;
};

enum class LineFaultKind { Noise, Bias, Negate, Absolute, StuckAt, TimeDelay, PackageDrop };

const char* to_string(LineFaultKind kind);

// A fault transform spliced onto one line. Only the fields relevant to the
// kind are meaningful; the rest stay at their defaults so equality works.
struct LineFault {
  LineFaultKind kind = LineFaultKind::Negate;
  double sigma = 0.0;        // Noise
  double offset = 0.0;       // Bias
  double value = 0.0;        // StuckAt
  int delay = 0;             // TimeDelay, in samples
  double prob = 0.0;         // PackageDrop
  std::uint64_t seed = 0;    // Noise, PackageDrop
  bool operator==(const LineFault&) const = default;
};

struct Line {
  PortRef src;  // an output port
  PortRef dst;  // an input port; each input port has exactly one incoming line
  std::optional<LineFault> fault;

  // Stable display id; unique because dst ports have single incoming lines.
  std::string id() const { return src.str() + "->" + dst.str(); }
  bool operator==(const Line&) const = default;
};

struct Model {
  std::string name;
  std::vector<Block> blocks;  // declaration order
  std::vector<Line> lines;

  const Block* find_block(const std::string& id) const;
  std::vector<const Block*> input_blocks() const;   // declaration order
  std::vector<const Block*> output_blocks() const;
  bool has_subsystems() const;

  bool operator==(const Model&) const = default;
};

// Port counts implied by a block's kind and parameters.
int in_arity(const Block& block);
int out_arity(const Block& block);

struct PortName {
  bool is_input;
  int index;  // 1-based
};
// Parses "in<N>"/"out<N>"; nullopt if the name is malformed.
std::optional<PortName> parse_port_name(const std::string& port);

// True for blocks whose output at step j does not depend on their input at
// step j (they read previous-step state instead).
bool is_delaying(BlockKind kind);

struct Diagnostic {
  std::string code;     // e.g. "UnconnectedPort", "AlgebraicLoop"
  std::string element;  // offending block/line/port
  std::string message;

  std::string str() const { return code + "(" + element + ")" + (message.empty() ? "" : ": " + message); }
};

// Static validity checks; empty result iff all model invariants hold.
std::vector<Diagnostic> validate_model(const Model& model);

// Replace every Subsystem block by its contents. Inner block ids are
// prefixed with "<subsystem-id>/". Boundary Input/Output blocks disappear;
// lines are rewired end to end, carrying over at most one line fault per
// resulting connection. The flattened model simulates identically to the
// hierarchical one.
Model flatten(const Model& model);

}  // namespace pbmt
