#include "pbmt/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbmt/errors.hpp"
#include "pbmt/rng.hpp"

namespace pbmt {

using nlohmann::json;

bool is_line_operator(MutationOp op) {
  switch (op) {
    case MutationOp::Noise:
    case MutationOp::Bias:
    case MutationOp::Negate:
    case MutationOp::Absolute:
    case MutationOp::StuckAt:
    case MutationOp::TimeDelay:
    case MutationOp::PackageDrop: return true;
    default: return false;
  }
}

const char* to_string(MutationOp op) {
  switch (op) {
    case MutationOp::Noise: return "noise";
    case MutationOp::Bias: return "bias";
    case MutationOp::Negate: return "negate";
    case MutationOp::Absolute: return "absolute";
    case MutationOp::StuckAt: return "stuckat";
    case MutationOp::TimeDelay: return "timedelay";
    case MutationOp::PackageDrop: return "packagedrop";
    case MutationOp::Ror: return "ror";
    case MutationOp::Lor: return "lor";
    case MutationOp::S2p: return "s2p";
    case MutationOp::P2s: return "p2s";
    case MutationOp::Asr: return "asr";
    case MutationOp::LutStuckAtZero: return "lut_stuck_zero";
    case MutationOp::LutSwapNeighbors: return "lut_swap";
  }
  return "?";
}

std::vector<MutationOp> all_mutation_ops() {
  return {MutationOp::Noise,       MutationOp::Bias,        MutationOp::Negate,
          MutationOp::Absolute,    MutationOp::StuckAt,     MutationOp::TimeDelay,
          MutationOp::PackageDrop, MutationOp::Ror,         MutationOp::Lor,
          MutationOp::S2p,         MutationOp::P2s,         MutationOp::Asr,
          MutationOp::LutStuckAtZero, MutationOp::LutSwapNeighbors};
}

MutationOp mutation_op_from_string(const std::string& name) {
  for (MutationOp op : all_mutation_ops())
    if (name == to_string(op)) return op;
  throw Error("unknown mutation operator: " + name);
}

namespace {

BlockKind target_kind(MutationOp op) {
  switch (op) {
    case MutationOp::Ror: return BlockKind::Relational;
    case MutationOp::Lor: return BlockKind::Logical;
    case MutationOp::S2p:
    case MutationOp::Asr: return BlockKind::Sum;
    case MutationOp::P2s: return BlockKind::Product;
    case MutationOp::LutStuckAtZero:
    case MutationOp::LutSwapNeighbors: return BlockKind::Lookup1D;
    default: return BlockKind::Subsystem;  // unreachable for line ops
  }
}

// First line leaving the block's output port, in declaration order; defines
// the mutated signal s' for block mutations.
const Line* first_outgoing(const Model& model, const std::string& block_id) {
  for (const auto& l : model.lines)
    if (l.src.block == block_id) return &l;
  return nullptr;
}

bool block_site_usable(const Model& model, MutationOp op, const Block& b) {
  if (b.kind() != target_kind(op)) return false;
  if (!first_outgoing(model, b.id)) return false;
  switch (op) {
    case MutationOp::LutStuckAtZero: {
      const auto& t = std::get<Lookup1DParams>(b.params).table;
      return std::any_of(t.begin(), t.end(), [](double v) { return v != 0.0; });
    }
    case MutationOp::LutSwapNeighbors: {
      const auto& t = std::get<Lookup1DParams>(b.params).table;
      for (std::size_t i = 0; i + 1 < t.size(); ++i)
        if (t[i] != t[i + 1]) return true;
      return false;
    }
    default: return true;
  }
}

}  // namespace

std::vector<std::pair<MutationOp, std::string>> enumerate_sites(
    const Model& model, const std::vector<MutationOp>& ops) {
  std::vector<std::pair<MutationOp, std::string>> out;
  for (MutationOp op : ops) {
    if (is_line_operator(op)) {
      for (const auto& l : model.lines) out.emplace_back(op, l.id());
    } else {
      for (const auto& b : model.blocks)
        if (block_site_usable(model, op, b)) out.emplace_back(op, b.id);
    }
  }
  return out;
}

MutantModel apply_mutation(const Model& model, const MutantDescriptor& d) {
  MutantModel out;
  out.descriptor = d;
  out.model = model;

  if (is_line_operator(d.op)) {
    Line* line = nullptr;
    for (auto& l : out.model.lines)
      if (l.id() == d.site) line = &l;
    if (!line) throw IncompatibleSite("no line " + d.site + " in model " + model.name);
    if (line->fault) throw IncompatibleSite("line " + d.site + " already carries a fault");
    LineFault f;
    switch (d.op) {
      case MutationOp::Noise:
        f.kind = LineFaultKind::Noise;
        f.sigma = d.number;
        f.seed = d.seed;
        break;
      case MutationOp::Bias:
        f.kind = LineFaultKind::Bias;
        f.offset = d.number;
        break;
      case MutationOp::Negate: f.kind = LineFaultKind::Negate; break;
      case MutationOp::Absolute: f.kind = LineFaultKind::Absolute; break;
      case MutationOp::StuckAt:
        f.kind = LineFaultKind::StuckAt;
        f.value = d.number;
        break;
      case MutationOp::TimeDelay:
        f.kind = LineFaultKind::TimeDelay;
        f.delay = d.index;
        break;
      case MutationOp::PackageDrop:
        f.kind = LineFaultKind::PackageDrop;
        f.prob = d.number;
        f.seed = d.seed;
        break;
      default: break;
    }
    line->fault = f;
    out.mutated_signal = d.site;
    return out;
  }

  Block* block = nullptr;
  for (auto& b : out.model.blocks)
    if (b.id == d.site) block = &b;
  if (!block) throw IncompatibleSite("no block " + d.site + " in model " + model.name);
  if (block->kind() != target_kind(d.op))
    throw IncompatibleSite(std::string(to_string(d.op)) + " cannot mutate a " +
                           to_string(block->kind()) + " block");

  switch (d.op) {
    case MutationOp::Ror: {
      auto& p = std::get<RelationalParams>(block->params);
      if (p.op == d.rel_to) throw IncompatibleSite("ror replacement equals original operator");
      p.op = d.rel_to;
      break;
    }
    case MutationOp::Lor: {
      auto& p = std::get<LogicalParams>(block->params);
      if (p.op == d.logic_to) throw IncompatibleSite("lor replacement equals original operator");
      p.op = d.logic_to;  // arity untouched; mismatches surface as invalid mutants
      break;
    }
    case MutationOp::S2p: {
      const int arity = static_cast<int>(std::get<SumParams>(block->params).signs.size());
      block->params = ProductParams{arity};
      break;
    }
    case MutationOp::P2s: {
      const int arity = std::get<ProductParams>(block->params).arity;
      block->params = SumParams{std::string(static_cast<std::size_t>(arity), '+')};
      break;
    }
    case MutationOp::Asr: {
      auto& p = std::get<SumParams>(block->params);
      if (d.index < 0 || d.index >= static_cast<int>(p.signs.size()))
        throw IncompatibleSite("asr sign index out of range");
      p.signs[static_cast<std::size_t>(d.index)] =
          p.signs[static_cast<std::size_t>(d.index)] == '+' ? '-' : '+';
      break;
    }
    case MutationOp::LutStuckAtZero: {
      auto& p = std::get<Lookup1DParams>(block->params);
      if (d.index < 0 || d.index >= static_cast<int>(p.table.size()))
        throw IncompatibleSite("lut entry index out of range");
      if (p.table[static_cast<std::size_t>(d.index)] == 0.0)
        throw IncompatibleSite("lut entry already zero");
      p.table[static_cast<std::size_t>(d.index)] = 0.0;
      break;
    }
    case MutationOp::LutSwapNeighbors: {
      auto& p = std::get<Lookup1DParams>(block->params);
      if (d.index < 0 || d.index + 1 >= static_cast<int>(p.table.size()))
        throw IncompatibleSite("lut swap index out of range");
      auto& a = p.table[static_cast<std::size_t>(d.index)];
      auto& b = p.table[static_cast<std::size_t>(d.index) + 1];
      if (a == b) throw IncompatibleSite("lut swap of equal entries is a no-op");
      std::swap(a, b);
      break;
    }
    default: break;
  }
  out.mutated_signal = first_outgoing(model, d.site) ? first_outgoing(model, d.site)->id() : "";
  if (out.mutated_signal.empty())
    throw IncompatibleSite("block " + d.site + " has no outgoing line to observe");
  return out;
}

namespace {

struct Amplitude {
  double lo = 0.0;
  double hi = 0.0;
  double scale() const {
    const double a = std::max({hi - lo, std::abs(hi), std::abs(lo)});
    return a > 1e-9 ? a : 1.0;
  }
};

// One mid-range constant-input simulation to size fault magnitudes.
std::map<std::string, Amplitude> probe_amplitudes(const Model& model, const SimConfig& cfg) {
  const Simulator sim(model, cfg);
  const auto inputs = sim.flat_model().input_blocks();
  TestCase probe;
  probe.controls.resize(static_cast<long>(inputs.size()), 1);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& p = std::get<InputParams>(inputs[i]->params);
    probe.controls(static_cast<long>(i), 0) = 0.5 * (p.lo + p.hi);
  }
  const Trace trace = sim.run(probe);
  std::map<std::string, Amplitude> out;
  for (const auto& name : trace.names)
    out[name] = {trace.signal(name).minCoeff(), trace.signal(name).maxCoeff()};
  return out;
}

RelOp draw_other_relop(RelOp current, rng::Stream& stream) {
  static constexpr RelOp kAll[] = {RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge, RelOp::Eq, RelOp::Ne};
  std::vector<RelOp> pool;
  for (RelOp r : kAll)
    if (r != current) pool.push_back(r);
  return pool[static_cast<std::size_t>(stream.below(static_cast<int>(pool.size())))];
}

LogicOp draw_other_logicop(LogicOp current, rng::Stream& stream) {
  static constexpr LogicOp kAll[] = {LogicOp::And, LogicOp::Or, LogicOp::Not};
  std::vector<LogicOp> pool;
  for (LogicOp o : kAll)
    if (o != current) pool.push_back(o);
  return pool[static_cast<std::size_t>(stream.below(static_cast<int>(pool.size())))];
}

}  // namespace

GeneratedMutants generate_mutants(const Model& model, const std::vector<MutationOp>& ops,
                                  std::uint64_t master_seed, const SimConfig& cfg,
                                  const MutationDefaults& defaults) {
  const auto sites = enumerate_sites(model, ops);
  const auto amplitudes = probe_amplitudes(model, cfg);

  GeneratedMutants out;
  int ordinal = 0;
  for (const auto& [op, site] : sites) {
    rng::Stream stream(rng::mix(master_seed, static_cast<std::uint64_t>(ordinal)));

    MutantDescriptor d;
    {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "m%03d", ordinal);
      d.id = std::string(buf) + "_" + to_string(op);
    }
    d.op = op;
    d.site = site;
    if (op == MutationOp::Noise || op == MutationOp::PackageDrop) d.seed = stream.fork(0xfau);

    const std::string amp_key = is_line_operator(op)
                                    ? site
                                    : (first_outgoing(model, site) ? first_outgoing(model, site)->id() : "");
    const double scale = amplitudes.count(amp_key) ? amplitudes.at(amp_key).scale() : 1.0;

    switch (op) {
      case MutationOp::Noise: d.number = defaults.noise_rel * scale; break;
      case MutationOp::Bias:
        d.number = stream.uniform(-defaults.bias_rel * scale, defaults.bias_rel * scale);
        break;
      case MutationOp::StuckAt: {
        const Amplitude a = amplitudes.count(amp_key) ? amplitudes.at(amp_key) : Amplitude{0, 1};
        const double choices[3] = {0.0, a.lo, a.hi};
        d.number = choices[stream.below(3)];
        break;
      }
      case MutationOp::TimeDelay:
        d.index = defaults.time_delays[static_cast<std::size_t>(
            stream.below(static_cast<int>(defaults.time_delays.size())))];
        break;
      case MutationOp::PackageDrop: d.number = defaults.drop_prob; break;
      case MutationOp::Ror:
        d.rel_to = draw_other_relop(std::get<RelationalParams>(model.find_block(site)->params).op,
                                    stream);
        break;
      case MutationOp::Lor:
        d.logic_to = draw_other_logicop(std::get<LogicalParams>(model.find_block(site)->params).op,
                                        stream);
        break;
      case MutationOp::Asr: {
        const auto& signs = std::get<SumParams>(model.find_block(site)->params).signs;
        d.index = stream.below(static_cast<int>(signs.size()));
        break;
      }
      case MutationOp::LutStuckAtZero: {
        const auto& table = std::get<Lookup1DParams>(model.find_block(site)->params).table;
        std::vector<int> nonzero;
        for (int i = 0; i < static_cast<int>(table.size()); ++i)
          if (table[static_cast<std::size_t>(i)] != 0.0) nonzero.push_back(i);
        d.index = nonzero[static_cast<std::size_t>(stream.below(static_cast<int>(nonzero.size())))];
        break;
      }
      case MutationOp::LutSwapNeighbors: {
        const auto& table = std::get<Lookup1DParams>(model.find_block(site)->params).table;
        std::vector<int> swappable;
        for (int i = 0; i + 1 < static_cast<int>(table.size()); ++i)
          if (table[static_cast<std::size_t>(i)] != table[static_cast<std::size_t>(i) + 1])
            swappable.push_back(i);
        d.index =
            swappable[static_cast<std::size_t>(stream.below(static_cast<int>(swappable.size())))];
        break;
      }
      default: break;
    }

    MutantRecord record;
    record.descriptor = d;
    MutantModel mutant = apply_mutation(model, d);
    record.mutated_signal = mutant.mutated_signal;
    record.diagnostics = validate_model(mutant.model);
    record.valid = record.diagnostics.empty();
    if (record.valid) out.mutants.push_back(std::move(mutant));
    out.records.push_back(std::move(record));
    ++ordinal;
  }
  return out;
}

namespace {

json descriptor_to_json(const MutantDescriptor& d) {
  json j;
  j["id"] = d.id;
  j["op"] = to_string(d.op);
  j["site"] = d.site;
  switch (d.op) {
    case MutationOp::Noise:
      j["sigma"] = d.number;
      j["seed"] = d.seed;
      break;
    case MutationOp::Bias: j["offset"] = d.number; break;
    case MutationOp::StuckAt: j["value"] = d.number; break;
    case MutationOp::TimeDelay: j["delay"] = d.index; break;
    case MutationOp::PackageDrop:
      j["prob"] = d.number;
      j["seed"] = d.seed;
      break;
    case MutationOp::Ror: j["replacement"] = to_string(d.rel_to); break;
    case MutationOp::Lor: j["replacement"] = to_string(d.logic_to); break;
    case MutationOp::Asr: j["flip_index"] = d.index; break;
    case MutationOp::LutStuckAtZero:
    case MutationOp::LutSwapNeighbors: j["entry"] = d.index; break;
    default: break;
  }
  return j;
}

MutantDescriptor descriptor_from_json(const json& j) {
  MutantDescriptor d;
  d.id = j.at("id").get<std::string>();
  d.op = mutation_op_from_string(j.at("op").get<std::string>());
  d.site = j.at("site").get<std::string>();
  switch (d.op) {
    case MutationOp::Noise:
      d.number = j.at("sigma").get<double>();
      d.seed = j.at("seed").get<std::uint64_t>();
      break;
    case MutationOp::Bias: d.number = j.at("offset").get<double>(); break;
    case MutationOp::StuckAt: d.number = j.at("value").get<double>(); break;
    case MutationOp::TimeDelay: d.index = j.at("delay").get<int>(); break;
    case MutationOp::PackageDrop:
      d.number = j.at("prob").get<double>();
      d.seed = j.at("seed").get<std::uint64_t>();
      break;
    case MutationOp::Ror: {
      const std::string r = j.at("replacement").get<std::string>();
      for (RelOp op : {RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge, RelOp::Eq, RelOp::Ne})
        if (r == to_string(op)) d.rel_to = op;
      break;
    }
    case MutationOp::Lor: {
      const std::string r = j.at("replacement").get<std::string>();
      for (LogicOp op : {LogicOp::And, LogicOp::Or, LogicOp::Not})
        if (r == to_string(op)) d.logic_to = op;
      break;
    }
    case MutationOp::Asr: d.index = j.at("flip_index").get<int>(); break;
    case MutationOp::LutStuckAtZero:
    case MutationOp::LutSwapNeighbors: d.index = j.at("entry").get<int>(); break;
    default: break;
  }
  return d;
}

}  // namespace

std::string manifest_to_json(const GeneratedMutants& generated, const std::string& model_name,
                             std::uint64_t master_seed) {
  json j;
  j["schema"] = "pbmt-mutants/1";
  j["model"] = model_name;
  j["master_seed"] = master_seed;
  j["mutants"] = json::array();
  for (const auto& r : generated.records) {
    json m = descriptor_to_json(r.descriptor);
    m["valid"] = r.valid;
    m["mutated_signal"] = r.mutated_signal;
    if (!r.valid) {
      m["diagnostics"] = json::array();
      for (const auto& d : r.diagnostics) m["diagnostics"].push_back(d.str());
    }
    j["mutants"].push_back(std::move(m));
  }
  return j.dump(2) + "\n";
}

std::vector<MutantRecord> manifest_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  if (j.value("schema", "") != "pbmt-mutants/1") throw Error("unexpected manifest schema");
  std::vector<MutantRecord> out;
  for (const auto& m : j.at("mutants")) {
    MutantRecord r;
    r.descriptor = descriptor_from_json(m);
    r.valid = m.value("valid", true);
    r.mutated_signal = m.value("mutated_signal", "");
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const GeneratedMutants& generated, const std::string& model_name,
                    std::uint64_t master_seed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path);
  out << manifest_to_json(generated, model_name, master_seed);
}

std::vector<MutantRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

}  // namespace pbmt
