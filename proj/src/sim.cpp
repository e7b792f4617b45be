#include "pbmt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "pbmt/errors.hpp"
#include "pbmt/rng.hpp"

namespace pbmt {

int SimConfig::sample_count() const {
  return static_cast<int>(std::floor(horizon / sample_time + 1e-9)) + 1;
}

int Trace::col(const std::string& name) const {
  auto it = column.find(name);
  if (it == column.end()) throw MissingSignal(name);
  return it->second;
}

namespace {

struct CompiledFault {
  LineFault spec;
  int buffer_at = -1;  // TimeDelay ring buffer offset into per-run state
};

struct CompiledLine {
  int src_block;
  int dst_block;
  int trace_col;
  int fault = -1;  // index into faults, -1 for clean lines
};

struct CompiledBlock {
  BlockKind kind;
  std::vector<int> in_lines;  // per input port, index into lines
  int trace_col = -1;         // Input/Output blocks only
  int input_row = -1;         // Input blocks: row in TestCase::controls
  int state = -1;             // delay blocks: index into per-run state

  // Flattened parameters.
  double a = 0.0, b = 0.0;  // gain/const/init/threshold or saturation bounds
  std::string signs;
  RelOp rel = RelOp::Lt;
  LogicOp logic = LogicOp::And;
  std::vector<double> bps, tab;
};

double lookup_interp(const std::vector<double>& bps, const std::vector<double>& tab, double x) {
  if (x <= bps.front()) return tab.front();
  if (x >= bps.back()) return tab.back();
  const auto it = std::upper_bound(bps.begin(), bps.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - bps.begin()) - 1;
  const double w = (x - bps[i]) / (bps[i + 1] - bps[i]);
  return tab[i] + w * (tab[i + 1] - tab[i]);
}

bool truthy(double v) { return v != 0.0; }

double relational(RelOp op, double a, double b) {
  switch (op) {
    case RelOp::Lt: return a < b ? 1.0 : 0.0;
    case RelOp::Le: return a <= b ? 1.0 : 0.0;
    case RelOp::Gt: return a > b ? 1.0 : 0.0;
    case RelOp::Ge: return a >= b ? 1.0 : 0.0;
    case RelOp::Eq: return a == b ? 1.0 : 0.0;
    case RelOp::Ne: return a != b ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

struct Simulator::Impl {
  Model flat;
  SimConfig cfg;
  int k = 0;

  std::vector<CompiledBlock> blocks;
  std::vector<CompiledLine> lines;
  std::vector<CompiledFault> faults;
  std::vector<int> eval_order;   // non-delay blocks, topological
  std::vector<int> delay_order;  // delay blocks, declaration order
  std::vector<double> state_init;
  int delay_ring = 0;  // total TimeDelay buffer length

  std::vector<std::string> names;
  std::unordered_map<std::string, int> columns;

  std::vector<std::pair<double, double>> input_ranges;  // declared [lo,hi]

  void compile(const Model& model);
};

void Simulator::Impl::compile(const Model& model) {
  auto diags = validate_model(model);
  if (!diags.empty()) {
    std::string msg = "model " + model.name + " is invalid:";
    for (const auto& d : diags) msg += "\n  " + d.str();
    throw ModelError(msg);
  }
  flat = flatten(model);
  if (cfg.sample_time <= 0) throw Error("sample_time must be positive");
  k = cfg.sample_count();
  if (k < 2) throw Error("horizon too short: need at least 2 samples");

  const int n = static_cast<int>(flat.blocks.size());
  std::unordered_map<std::string, int> bindex;
  for (int i = 0; i < n; ++i) bindex[flat.blocks[i].id] = i;

  // Trace columns: inputs, outputs, then lines.
  auto add_col = [&](const std::string& name) {
    columns[name] = static_cast<int>(names.size());
    names.push_back(name);
    return columns[name];
  };

  blocks.resize(n);
  for (int i = 0; i < n; ++i) {
    const Block& src = flat.blocks[i];
    CompiledBlock& cb = blocks[i];
    cb.kind = src.kind();
    cb.in_lines.assign(in_arity(src), -1);
    switch (cb.kind) {
      case BlockKind::Input: {
        const auto& p = std::get<InputParams>(src.params);
        cb.input_row = static_cast<int>(input_ranges.size());
        input_ranges.emplace_back(p.lo, p.hi);
        cb.trace_col = add_col(src.id);
        break;
      }
      case BlockKind::Output: cb.trace_col = add_col(src.id); break;
      case BlockKind::Constant: cb.a = std::get<ConstantParams>(src.params).value; break;
      case BlockKind::Gain: cb.a = std::get<GainParams>(src.params).factor; break;
      case BlockKind::Sum: cb.signs = std::get<SumParams>(src.params).signs; break;
      case BlockKind::Relational: cb.rel = std::get<RelationalParams>(src.params).op; break;
      case BlockKind::Logical: cb.logic = std::get<LogicalParams>(src.params).op; break;
      case BlockKind::Switch: cb.a = std::get<SwitchParams>(src.params).threshold; break;
      case BlockKind::Saturation: {
        const auto& p = std::get<SaturationParams>(src.params);
        cb.a = p.lo;
        cb.b = p.hi;
        break;
      }
      case BlockKind::UnitDelay:
        cb.state = static_cast<int>(state_init.size());
        state_init.push_back(std::get<UnitDelayParams>(src.params).init);
        break;
      case BlockKind::DiscreteIntegrator:
        cb.state = static_cast<int>(state_init.size());
        state_init.push_back(std::get<IntegratorParams>(src.params).init);
        break;
      case BlockKind::Lookup1D: {
        const auto& p = std::get<Lookup1DParams>(src.params);
        cb.bps = p.breakpoints;
        cb.tab = p.table;
        break;
      }
      default: break;
    }
  }

  lines.reserve(flat.lines.size());
  for (const auto& l : flat.lines) {
    CompiledLine cl;
    cl.src_block = bindex.at(l.src.block);
    cl.dst_block = bindex.at(l.dst.block);
    cl.trace_col = add_col(l.id());
    if (l.fault) {
      CompiledFault cf;
      cf.spec = *l.fault;
      if (l.fault->kind == LineFaultKind::TimeDelay) {
        cf.buffer_at = delay_ring;
        delay_ring += l.fault->delay;
      }
      cl.fault = static_cast<int>(faults.size());
      faults.push_back(cf);
    }
    const int port = parse_port_name(l.dst.port)->index;
    blocks[cl.dst_block].in_lines[port - 1] = static_cast<int>(lines.size());
    lines.push_back(cl);
  }

  // Delay blocks evaluate first (their outputs come from state); everything
  // else follows the delay-cut topological order with lexicographic ties.
  for (int i = 0; i < n; ++i)
    if (is_delaying(blocks[i].kind)) delay_order.push_back(i);

  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : lines) {
    if (is_delaying(blocks[l.src_block].kind) || is_delaying(blocks[l.dst_block].kind)) continue;
    adj[l.src_block].push_back(l.dst_block);
    indeg[l.dst_block]++;
  }
  auto cmp = [&](int a, int b) { return flat.blocks[a].id > flat.blocks[b].id; };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (int i = 0; i < n; ++i)
    if (!is_delaying(blocks[i].kind) && indeg[i] == 0) ready.push(i);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    eval_order.push_back(u);
    for (int v : adj[u])
      if (--indeg[v] == 0) ready.push(v);
  }
  // validate_model already rejected algebraic loops
}

Simulator::Simulator(const Model& model, const SimConfig& cfg) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = cfg;
  impl_->compile(model);
}

Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

const Model& Simulator::flat_model() const { return impl_->flat; }
const SimConfig& Simulator::config() const { return impl_->cfg; }

Trace Simulator::run(const TestCase& test) const {
  const Impl& im = *impl_;
  const int k = im.k;
  const int q = test.control_points();
  if (test.controls.rows() != static_cast<long>(im.input_ranges.size()))
    throw Error("test defines " + std::to_string(test.controls.rows()) + " inputs, model has " +
                std::to_string(im.input_ranges.size()));
  if (q < 1) throw Error("test needs at least one control point");
  for (long i = 0; i < test.controls.rows(); ++i) {
    const auto [lo, hi] = im.input_ranges[static_cast<std::size_t>(i)];
    for (long c = 0; c < q; ++c) {
      const double v = test.controls(i, c);
      if (!(v >= lo && v <= hi))
        throw Error("test input " + std::to_string(i) + " control " + std::to_string(c) +
                    " out of declared range");
    }
  }

  Trace trace;
  trace.times.resize(k);
  trace.names = im.names;
  trace.column = im.columns;
  trace.values.resize(k, static_cast<long>(im.names.size()));

  std::vector<double> outs(im.blocks.size(), 0.0);
  std::vector<double> state(im.state_init);
  std::vector<double> ring(static_cast<std::size_t>(im.delay_ring), 0.0);
  std::vector<double> drop_last(im.faults.size(), 0.0);
  std::vector<double> delay_first(im.faults.size(), 0.0);

  const double seg = im.cfg.horizon / q;

  auto check = [&](double v, int j, const std::string& name) {
    if (!std::isfinite(v)) throw NonFiniteSignal(j, name);
    return v;
  };

  // Applies the line's fault transform and records the line signal.
  auto line_value = [&](int li, int j) {
    const CompiledLine& cl = im.lines[static_cast<std::size_t>(li)];
    double v = outs[static_cast<std::size_t>(cl.src_block)];
    if (cl.fault >= 0) {
      const CompiledFault& cf = im.faults[static_cast<std::size_t>(cl.fault)];
      const LineFault& f = cf.spec;
      switch (f.kind) {
        case LineFaultKind::Negate: v = -v; break;
        case LineFaultKind::Absolute: v = std::abs(v); break;
        case LineFaultKind::Bias: v = v + f.offset; break;
        case LineFaultKind::StuckAt: v = f.value; break;
        case LineFaultKind::Noise: v = v + f.sigma * rng::normal_at(f.seed, static_cast<std::uint64_t>(j)); break;
        case LineFaultKind::TimeDelay: {
          const int d = f.delay;
          double* buf = ring.data() + cf.buffer_at;
          const double held = (j == 0) ? v : (j < d ? delay_first[static_cast<std::size_t>(cl.fault)] : buf[j % d]);
          if (j == 0) delay_first[static_cast<std::size_t>(cl.fault)] = v;
          buf[j % d] = v;
          v = held;
          break;
        }
        case LineFaultKind::PackageDrop: {
          const bool drop = j > 0 && rng::uniform01_at(f.seed, static_cast<std::uint64_t>(j)) < f.prob;
          if (drop) v = drop_last[static_cast<std::size_t>(cl.fault)];
          drop_last[static_cast<std::size_t>(cl.fault)] = v;
          break;
        }
      }
      check(v, j, im.flat.lines[static_cast<std::size_t>(li)].id());
    }
    trace.values(j, cl.trace_col) = v;
    return v;
  };

  for (int j = 0; j < k; ++j) {
    const double t = j * im.cfg.sample_time;
    trace.times(j) = t;
    const int ctrl = std::min(q - 1, static_cast<int>(std::floor(t / seg)));

    for (int bi : im.delay_order) outs[static_cast<std::size_t>(bi)] = state[static_cast<std::size_t>(im.blocks[static_cast<std::size_t>(bi)].state)];

    for (int bi : im.eval_order) {
      const CompiledBlock& cb = im.blocks[static_cast<std::size_t>(bi)];
      double v = 0.0;
      switch (cb.kind) {
        case BlockKind::Input:
          v = test.controls(cb.input_row, ctrl);
          trace.values(j, cb.trace_col) = v;
          break;
        case BlockKind::Output:
          v = line_value(cb.in_lines[0], j);
          trace.values(j, cb.trace_col) = v;
          break;
        case BlockKind::Constant: v = cb.a; break;
        case BlockKind::Gain: v = cb.a * line_value(cb.in_lines[0], j); break;
        case BlockKind::Sum: {
          for (std::size_t p = 0; p < cb.in_lines.size(); ++p) {
            const double x = line_value(cb.in_lines[p], j);
            v += cb.signs[p] == '+' ? x : -x;
          }
          break;
        }
        case BlockKind::Product: {
          v = 1.0;
          for (int li : cb.in_lines) v *= line_value(li, j);
          break;
        }
        case BlockKind::Abs: v = std::abs(line_value(cb.in_lines[0], j)); break;
        case BlockKind::UnaryMinus: v = -line_value(cb.in_lines[0], j); break;
        case BlockKind::Relational: {
          const double a = line_value(cb.in_lines[0], j);
          const double b = line_value(cb.in_lines[1], j);
          v = relational(cb.rel, a, b);
          break;
        }
        case BlockKind::Logical: {
          if (cb.logic == LogicOp::Not) {
            v = truthy(line_value(cb.in_lines[0], j)) ? 0.0 : 1.0;
          } else {
            bool acc = cb.logic == LogicOp::And;
            for (int li : cb.in_lines) {
              const bool x = truthy(line_value(li, j));
              acc = cb.logic == LogicOp::And ? (acc && x) : (acc || x);
            }
            v = acc ? 1.0 : 0.0;
          }
          break;
        }
        case BlockKind::Switch: {
          const double d1 = line_value(cb.in_lines[0], j);
          const double ctl = line_value(cb.in_lines[1], j);
          const double d2 = line_value(cb.in_lines[2], j);
          v = ctl >= cb.a ? d1 : d2;
          break;
        }
        case BlockKind::Saturation: v = std::clamp(line_value(cb.in_lines[0], j), cb.a, cb.b); break;
        case BlockKind::Lookup1D: v = lookup_interp(cb.bps, cb.tab, line_value(cb.in_lines[0], j)); break;
        default: break;
      }
      outs[static_cast<std::size_t>(bi)] = check(v, j, im.flat.blocks[static_cast<std::size_t>(bi)].id);
    }

    // Latch: delay blocks read their inputs after everything settled.
    for (int bi : im.delay_order) {
      const CompiledBlock& cb = im.blocks[static_cast<std::size_t>(bi)];
      const double u = line_value(cb.in_lines[0], j);
      double& st = state[static_cast<std::size_t>(cb.state)];
      if (cb.kind == BlockKind::UnitDelay) {
        st = u;
      } else {
        st = check(st + im.cfg.sample_time * u, j, im.flat.blocks[static_cast<std::size_t>(bi)].id);
      }
    }
  }
  return trace;
}

Trace simulate(const Model& model, const TestCase& test, const SimConfig& cfg) {
  return Simulator(model, cfg).run(test);
}

double signal_distance(const Eigen::Ref<const Eigen::VectorXd>& s,
                       const Eigen::Ref<const Eigen::VectorXd>& s_prime) {
  if (s.size() != s_prime.size()) throw LengthMismatch(s.size(), s_prime.size());
  return (s - s_prime).norm();
}

}  // namespace pbmt
