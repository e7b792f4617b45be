#include "pbmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "pbmt/errors.hpp"

namespace pbmt {

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Input: return "Input";
    case BlockKind::Output: return "Output";
    case BlockKind::Constant: return "Constant";
    case BlockKind::Gain: return "Gain";
    case BlockKind::Sum: return "Sum";
    case BlockKind::Product: return "Product";
    case BlockKind::Abs: return "Abs";
    case BlockKind::UnaryMinus: return "UnaryMinus";
    case BlockKind::Relational: return "Relational";
    case BlockKind::Logical: return "Logical";
    case BlockKind::Switch: return "Switch";
    case BlockKind::Saturation: return "Saturation";
    case BlockKind::UnitDelay: return "UnitDelay";
    case BlockKind::DiscreteIntegrator: return "DiscreteIntegrator";
    case BlockKind::Lookup1D: return "Lookup1D";
    case BlockKind::Subsystem: return "Subsystem";
  }
  return "?";
}

const char* to_string(RelOp op) {
  switch (op) {
    case RelOp::Lt: return "<";
    case RelOp::Le: return "<=";
    case RelOp::Gt: return ">";
    case RelOp::Ge: return ">=";
    case RelOp::Eq: return "==";
    case RelOp::Ne: return "!=";
  }
  return "?";
}

const char* to_string(LogicOp op) {
  switch (op) {
    case LogicOp::And: return "AND";
    case LogicOp::Or: return "OR";
    case LogicOp::Not: return "NOT";
  }
  return "?";
}

const char* to_string(LineFaultKind kind) {
  switch (kind) {
    case LineFaultKind::Noise: return "noise";
    case LineFaultKind::Bias: return "bias";
    case LineFaultKind::Negate: return "negate";
    case LineFaultKind::Absolute: return "absolute";
    case LineFaultKind::StuckAt: return "stuckat";
    case LineFaultKind::TimeDelay: return "timedelay";
    case LineFaultKind::PackageDrop: return "packagedrop";
  }
  return "?";
}

bool SubsystemParams::operator==(const SubsystemParams& other) const {
  if (inner == other.inner) return true;
  if (!inner || !other.inner) return false;
  return *inner == *other.inner;
}

const Block* Model::find_block(const std::string& id) const {
  for (const auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

std::vector<const Block*> Model::input_blocks() const {
  std::vector<const Block*> out;
  for (const auto& b : blocks) {
    if (b.kind() == BlockKind::Input) out.push_back(&b);
  }
  return out;
}

std::vector<const Block*> Model::output_blocks() const {
  std::vector<const Block*> out;
  for (const auto& b : blocks) {
    if (b.kind() == BlockKind::Output) out.push_back(&b);
  }
  return out;
}

bool Model::has_subsystems() const {
  return std::any_of(blocks.begin(), blocks.end(),
                     [](const Block& b) { return b.kind() == BlockKind::Subsystem; });
}

int in_arity(const Block& block) {
  switch (block.kind()) {
    case BlockKind::Input:
    case BlockKind::Constant: return 0;
    case BlockKind::Output:
    case BlockKind::Gain:
    case BlockKind::Abs:
    case BlockKind::UnaryMinus:
    case BlockKind::Saturation:
    case BlockKind::UnitDelay:
    case BlockKind::DiscreteIntegrator:
    case BlockKind::Lookup1D: return 1;
    case BlockKind::Relational: return 2;
    case BlockKind::Switch: return 3;
    case BlockKind::Sum:
      return static_cast<int>(std::get<SumParams>(block.params).signs.size());
    case BlockKind::Product: return std::get<ProductParams>(block.params).arity;
    case BlockKind::Logical: return std::get<LogicalParams>(block.params).arity;
    case BlockKind::Subsystem: {
      const auto& inner = std::get<SubsystemParams>(block.params).inner;
      return inner ? static_cast<int>(inner->input_blocks().size()) : 0;
    }
  }
  return 0;
}

int out_arity(const Block& block) {
  switch (block.kind()) {
    case BlockKind::Output: return 0;
    case BlockKind::Subsystem: {
      const auto& inner = std::get<SubsystemParams>(block.params).inner;
      return inner ? static_cast<int>(inner->output_blocks().size()) : 0;
    }
    default: return 1;
  }
}

bool is_delaying(BlockKind kind) {
  return kind == BlockKind::UnitDelay || kind == BlockKind::DiscreteIntegrator;
}

std::optional<PortName> parse_port_name(const std::string& port) {
  bool is_input;
  std::size_t digits_at;
  if (port.rfind("in", 0) == 0) {
    is_input = true;
    digits_at = 2;
  } else if (port.rfind("out", 0) == 0) {
    is_input = false;
    digits_at = 3;
  } else {
    return std::nullopt;
  }
  if (digits_at >= port.size()) return std::nullopt;
  int idx = 0;
  for (std::size_t i = digits_at; i < port.size(); ++i) {
    if (port[i] < '0' || port[i] > '9') return std::nullopt;
    idx = idx * 10 + (port[i] - '0');
    if (idx > 1000000) return std::nullopt;
  }
  if (idx < 1) return std::nullopt;
  if (port[digits_at] == '0') return std::nullopt;  // no leading zeros
  return PortName{is_input, idx};
}

namespace {

bool finite(double v) { return std::isfinite(v); }

void check_fault(const LineFault& f, const std::string& element, std::vector<Diagnostic>& out) {
  switch (f.kind) {
    case LineFaultKind::Noise:
      if (!(f.sigma > 0.0) || !finite(f.sigma))
        out.push_back({"BadFault", element, "noise sigma must be positive"});
      break;
    case LineFaultKind::Bias:
      if (!finite(f.offset)) out.push_back({"BadFault", element, "bias offset must be finite"});
      break;
    case LineFaultKind::StuckAt:
      if (!finite(f.value)) out.push_back({"BadFault", element, "stuckat value must be finite"});
      break;
    case LineFaultKind::TimeDelay:
      if (f.delay < 1) out.push_back({"BadFault", element, "timedelay needs delay >= 1 samples"});
      break;
    case LineFaultKind::PackageDrop:
      if (!(f.prob > 0.0 && f.prob < 1.0))
        out.push_back({"BadFault", element, "packagedrop probability must lie in (0,1)"});
      break;
    case LineFaultKind::Negate:
    case LineFaultKind::Absolute: break;
  }
}

void check_block_params(const Block& b, const std::string& element, bool top_level,
                        std::vector<Diagnostic>& out) {
  switch (b.kind()) {
    case BlockKind::Input: {
      const auto& p = std::get<InputParams>(b.params);
      if (top_level && !p.has_range)
        out.push_back({"MissingInputRange", element, "top-level inputs need range=[lo,hi]"});
      if (p.has_range && (!finite(p.lo) || !finite(p.hi) || p.lo > p.hi))
        out.push_back({"BadParam", element, "input range must satisfy lo <= hi"});
      break;
    }
    case BlockKind::Constant:
      if (!finite(std::get<ConstantParams>(b.params).value))
        out.push_back({"BadParam", element, "constant value must be finite"});
      break;
    case BlockKind::Gain:
      if (!finite(std::get<GainParams>(b.params).factor))
        out.push_back({"BadParam", element, "gain factor must be finite"});
      break;
    case BlockKind::Sum: {
      const auto& signs = std::get<SumParams>(b.params).signs;
      if (signs.empty()) out.push_back({"BadParam", element, "sum needs a nonempty sign string"});
      for (char c : signs) {
        if (c != '+' && c != '-') {
          out.push_back({"BadParam", element, "sum signs must be drawn from {+,-}"});
          break;
        }
      }
      break;
    }
    case BlockKind::Product:
      if (std::get<ProductParams>(b.params).arity < 1)
        out.push_back({"BadParam", element, "product arity must be >= 1"});
      break;
    case BlockKind::Logical: {
      const auto& p = std::get<LogicalParams>(b.params);
      if (p.op == LogicOp::Not && p.arity != 1)
        out.push_back({"BadParam", element, "NOT takes exactly one input"});
      if (p.op != LogicOp::Not && p.arity < 2)
        out.push_back({"BadParam", element, "AND/OR take at least two inputs"});
      break;
    }
    case BlockKind::Switch:
      if (!finite(std::get<SwitchParams>(b.params).threshold))
        out.push_back({"BadParam", element, "switch threshold must be finite"});
      break;
    case BlockKind::Saturation: {
      const auto& p = std::get<SaturationParams>(b.params);
      if (!finite(p.lo) || !finite(p.hi) || p.lo > p.hi)
        out.push_back({"BadParam", element, "saturation bounds must satisfy lo <= hi"});
      break;
    }
    case BlockKind::UnitDelay:
      if (!finite(std::get<UnitDelayParams>(b.params).init))
        out.push_back({"BadParam", element, "unit delay initial value must be finite"});
      break;
    case BlockKind::DiscreteIntegrator:
      if (!finite(std::get<IntegratorParams>(b.params).init))
        out.push_back({"BadParam", element, "integrator initial value must be finite"});
      break;
    case BlockKind::Lookup1D: {
      const auto& p = std::get<Lookup1DParams>(b.params);
      if (p.breakpoints.size() != p.table.size() || p.breakpoints.size() < 2) {
        out.push_back({"BadParam", element, "lookup needs >= 2 breakpoint/value pairs of equal length"});
        break;
      }
      for (std::size_t i = 0; i + 1 < p.breakpoints.size(); ++i) {
        if (!(p.breakpoints[i] < p.breakpoints[i + 1])) {
          out.push_back({"BadParam", element, "lookup breakpoints must be strictly increasing"});
          break;
        }
      }
      for (double v : p.breakpoints)
        if (!finite(v)) {
          out.push_back({"BadParam", element, "lookup breakpoints must be finite"});
          break;
        }
      for (double v : p.table)
        if (!finite(v)) {
          out.push_back({"BadParam", element, "lookup table values must be finite"});
          break;
        }
      break;
    }
    case BlockKind::Subsystem:
      if (!std::get<SubsystemParams>(b.params).inner)
        out.push_back({"BadParam", element, "subsystem body missing"});
      break;
    default: break;
  }
}

void validate_structure(const Model& model, bool top_level, const std::string& prefix,
                        std::vector<Diagnostic>& out) {
  std::set<std::string> seen;
  for (const auto& b : model.blocks) {
    const std::string element = prefix + b.id;
    if (!seen.insert(b.id).second) out.push_back({"DuplicateId", element, "block id declared twice"});
    check_block_params(b, element, top_level, out);
    if (b.kind() == BlockKind::Subsystem) {
      const auto& inner = std::get<SubsystemParams>(b.params).inner;
      if (inner) validate_structure(*inner, false, element + "/", out);
    }
  }

  // Lines: endpoints must resolve, direction must match, and each input
  // port must be driven by exactly one line.
  std::map<std::pair<std::string, int>, int> drivers;
  for (const auto& l : model.lines) {
    const std::string element = prefix + l.id();
    const Block* src = model.find_block(l.src.block);
    const Block* dst = model.find_block(l.dst.block);
    if (!src) out.push_back({"UnknownBlock", prefix + l.src.block, "line source block not declared"});
    if (!dst) out.push_back({"UnknownBlock", prefix + l.dst.block, "line target block not declared"});
    const auto sp = parse_port_name(l.src.port);
    const auto dp = parse_port_name(l.dst.port);
    if (!sp || sp->is_input)
      out.push_back({"BadPort", prefix + l.src.str(), "line source must be an output port"});
    else if (src && sp->index > out_arity(*src))
      out.push_back({"BadPort", prefix + l.src.str(), "output port index out of range"});
    if (!dp || !dp->is_input)
      out.push_back({"BadPort", prefix + l.dst.str(), "line target must be an input port"});
    else if (dst && dp->index > in_arity(*dst))
      out.push_back({"BadPort", prefix + l.dst.str(), "input port index out of range"});
    if (dst && dp && dp->is_input) drivers[{l.dst.block, dp->index}]++;
    if (l.fault) check_fault(*l.fault, element, out);
  }
  for (const auto& [port, count] : drivers) {
    if (count > 1)
      out.push_back({"MultipleDrivers", prefix + port.first + ".in" + std::to_string(port.second),
                     "input port driven by more than one line"});
  }
  for (const auto& b : model.blocks) {
    for (int i = 1; i <= in_arity(b); ++i) {
      if (!drivers.count({b.id, i}))
        out.push_back({"UnconnectedPort", prefix + b.id + ".in" + std::to_string(i),
                       "input port has no incoming line"});
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_model(const Model& model) {
  std::vector<Diagnostic> out;
  validate_structure(model, true, "", out);
  if (!out.empty()) return out;

  // Algebraic-loop check runs on the flattened graph: every cycle must pass
  // through a delaying block.
  Model flat;
  try {
    flat = flatten(model);
  } catch (const Error& e) {
    out.push_back({"AlgebraicLoop", model.name, e.what()});
    return out;
  }

  const int n = static_cast<int>(flat.blocks.size());
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[flat.blocks[i].id] = i;
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : flat.lines) {
    const Block& src = *flat.find_block(l.src.block);
    if (is_delaying(src.kind())) continue;
    adj[index[l.src.block]].push_back(index[l.dst.block]);
  }

  // Iterative DFS cycle detection, reporting one offending cycle.
  std::vector<int> state(n, 0);  // 0 unseen, 1 on stack, 2 done
  std::vector<int> parent(n, -1);
  for (int root = 0; root < n; ++root) {
    if (state[root] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < adj[u].size()) {
        const int v = adj[u][next++];
        if (state[v] == 0) {
          state[v] = 1;
          parent[v] = u;
          stack.push_back({v, 0});
        } else if (state[v] == 1) {
          std::string cycle = flat.blocks[v].id;
          for (int w = u; w != -1 && w != v; w = parent[w]) cycle = flat.blocks[w].id + "->" + cycle;
          cycle = flat.blocks[v].id + "->" + cycle;
          out.push_back({"AlgebraicLoop", cycle, "cycle without a delaying block"});
          return out;
        }
      } else {
        state[u] = 2;
        stack.pop_back();
      }
    }
  }
  return out;
}

namespace {

struct Scope {
  const Block* sub = nullptr;   // nullptr = top level
  const Model* model = nullptr;
};

using IncomingMap = std::map<std::pair<std::string, std::string>, const Line*>;

IncomingMap incoming_map(const Model& m) {
  IncomingMap map;
  for (const auto& l : m.lines) map[{l.dst.block, l.dst.port}] = &l;
  return map;
}

std::optional<LineFault> compose_fault(const std::optional<LineFault>& a,
                                       const std::optional<LineFault>& b) {
  if (a && b) throw Error("two line faults meet on one flattened connection");
  return a ? a : b;
}

}  // namespace

Model flatten(const Model& model) {
  if (!model.has_subsystems()) return model;

  // Flatten subsystem bodies first so the walk below crosses at most one
  // hierarchy boundary per hop.
  Model work = model;
  for (auto& b : work.blocks) {
    if (b.kind() == BlockKind::Subsystem) {
      auto& sp = std::get<SubsystemParams>(b.params);
      if (!sp.inner) throw Error("subsystem " + b.id + " has no body");
      sp.inner = std::make_shared<const Model>(flatten(*sp.inner));
    }
  }

  Model out;
  out.name = work.name;

  const IncomingMap top_in = incoming_map(work);
  std::map<std::string, IncomingMap> sub_in;
  for (const auto& b : work.blocks) {
    if (b.kind() == BlockKind::Subsystem)
      sub_in[b.id] = incoming_map(*std::get<SubsystemParams>(b.params).inner);
  }

  std::size_t total_lines = work.lines.size();
  for (const auto& [id, m] : sub_in) total_lines += m.size();

  // Walks backward from a consumer-side line to the atomic producer port,
  // hopping across subsystem boundaries and carrying the single fault.
  auto resolve = [&](Scope scope, const Line* line) -> std::pair<PortRef, std::optional<LineFault>> {
    std::optional<LineFault> fault = line->fault;
    std::size_t hops = 0;
    while (true) {
      if (++hops > total_lines + 1)
        throw Error("pass-through cycle while flattening " + work.name);
      const Model& m = scope.sub ? *std::get<SubsystemParams>(scope.sub->params).inner : work;
      const Block* src = m.find_block(line->src.block);
      if (!src) throw Error("flatten: unresolved block " + line->src.block);
      if (!scope.sub && src->kind() == BlockKind::Subsystem) {
        // Enter the subsystem through its output binding.
        const Model& inner = *std::get<SubsystemParams>(src->params).inner;
        const auto outs = inner.output_blocks();
        const int j = parse_port_name(line->src.port)->index;
        const Line* il = sub_in.at(src->id).at({outs[j - 1]->id, "in1"});
        fault = compose_fault(fault, il->fault);
        scope = {src, &inner};
        line = il;
      } else if (scope.sub && src->kind() == BlockKind::Input) {
        // Leave the subsystem through its input binding.
        const auto ins = scope.model->input_blocks();
        int i = 0;
        while (ins[i]->id != src->id) ++i;
        const Line* tl = top_in.at({scope.sub->id, "in" + std::to_string(i + 1)});
        fault = compose_fault(fault, tl->fault);
        scope = {nullptr, nullptr};
        line = tl;
      } else {
        const std::string block_id =
            scope.sub ? scope.sub->id + "/" + src->id : src->id;
        return {PortRef{block_id, line->src.port}, fault};
      }
    }
  };

  auto emit_consumer = [&](Scope scope, const Block& blk, const std::string& flat_id) {
    const IncomingMap& inmap = scope.sub ? sub_in.at(scope.sub->id) : top_in;
    for (int i = 1; i <= in_arity(blk); ++i) {
      const std::string port = "in" + std::to_string(i);
      auto it = inmap.find({blk.id, port});
      if (it == inmap.end()) throw Error("flatten: unconnected port " + blk.id + "." + port);
      auto [src, fault] = resolve(scope, it->second);
      out.lines.push_back(Line{src, PortRef{flat_id, port}, fault});
    }
  };

  for (const auto& b : work.blocks) {
    if (b.kind() == BlockKind::Subsystem) {
      const Model& inner = *std::get<SubsystemParams>(b.params).inner;
      const Scope scope{&b, &inner};
      for (const auto& ib : inner.blocks) {
        if (ib.kind() == BlockKind::Input || ib.kind() == BlockKind::Output) continue;
        Block nb = ib;
        nb.id = b.id + "/" + ib.id;
        out.blocks.push_back(nb);
        emit_consumer(scope, ib, nb.id);
      }
    } else {
      out.blocks.push_back(b);
      emit_consumer({nullptr, nullptr}, b, b.id);
    }
  }
  return out;
}

}  // namespace pbmt
