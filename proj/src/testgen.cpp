#include "pbmt/testgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "pbmt/errors.hpp"

namespace pbmt {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct InputBox {
  Eigen::VectorXd lo;  // per dimension (input-major, q_t entries per input)
  Eigen::VectorXd hi;
  int n_inputs = 0;
  int q_t = 1;

  static InputBox of(const Model& model, int q_t) {
    const auto inputs = model.input_blocks();
    InputBox box;
    box.n_inputs = static_cast<int>(inputs.size());
    box.q_t = q_t;
    const int dims = box.n_inputs * q_t;
    box.lo.resize(dims);
    box.hi.resize(dims);
    for (int i = 0; i < box.n_inputs; ++i) {
      const auto& p = std::get<InputParams>(inputs[static_cast<std::size_t>(i)]->params);
      for (int c = 0; c < q_t; ++c) {
        box.lo[i * q_t + c] = p.lo;
        box.hi[i * q_t + c] = p.hi;
      }
    }
    return box;
  }

  Eigen::VectorXd sample(rng::Stream& stream) const {
    Eigen::VectorXd v(lo.size());
    for (long d = 0; d < lo.size(); ++d) v[d] = stream.uniform(lo[d], hi[d]);
    return v;
  }

  Eigen::VectorXd clip(Eigen::VectorXd v) const { return v.cwiseMax(lo).cwiseMin(hi); }

  TestCase to_test(const Eigen::VectorXd& v) const {
    TestCase t;
    t.controls.resize(n_inputs, q_t);
    for (int i = 0; i < n_inputs; ++i)
      for (int c = 0; c < q_t; ++c) t.controls(i, c) = v[i * q_t + c];
    return t;
  }
};

}  // namespace

PenaltyWeights PenaltyWeights::defaults_for(const Model& model) {
  double diameter = 0.0;
  for (const auto* b : model.input_blocks()) {
    const auto& p = std::get<InputParams>(b->params);
    diameter = std::max(diameter, p.hi - p.lo);
  }
  if (diameter <= 0.0) diameter = 1.0;
  return PenaltyWeights{100.0 * diameter, 100.0 * diameter, 1e9};
}

FitnessBreakdown fitness(const TestCase& t, const Simulator& orig, const Simulator& mut,
                         const std::string& mutated_signal, const StlFormula& phi,
                         const PenaltyWeights& w) {
  FitnessBreakdown out;
  Trace trace_orig, trace_mut;
  try {
    trace_orig = orig.run(t);
    trace_mut = mut.run(t);
  } catch (const NonFiniteSignal&) {
    out.sim_failed = true;
    out.penalized_value = kNegInf;
    return out;
  }
  out.distance = signal_distance(trace_orig.signal(mutated_signal), trace_mut.signal(mutated_signal));
  out.rho_orig = robustness(trace_orig, phi, orig.config()).value;
  out.rho_mut = robustness(trace_mut, phi, mut.config()).value;
  out.feasible = out.rho_orig > 0.0 && out.rho_mut < 0.0;
  out.penalized_value = out.distance - w.w1 * std::max(0.0, -out.rho_orig) -
                        w.w2 * std::max(0.0, out.rho_mut) - (out.feasible ? 0.0 : w.barrier);
  return out;
}

FitnessBreakdown fitness(const TestCase& t, const Model& m, const MutantModel& mut,
                         const StlFormula& phi, const SimConfig& cfg, const PenaltyWeights& w) {
  const Simulator orig(m, cfg);
  const Simulator mutated(mut.model, cfg);
  return fitness(t, orig, mutated, mut.mutated_signal, phi, w);
}

UpdateRule default_update_rule() {
  return [](const Eigen::VectorXd& candidate, UpdateContext& ctx) {
    constexpr double kF = 0.5;
    constexpr double kMutationRate = 0.1;
    Eigen::VectorXd next = candidate + kF * (ctx.best - candidate) + kF * (ctx.peer1 - ctx.peer2);
    for (long d = 0; d < next.size(); ++d)
      if (ctx.stream.uniform01() < kMutationRate) next[d] = ctx.stream.uniform(ctx.lo[d], ctx.hi[d]);
    return next;
  };
}

namespace {

struct Optimizer {
  const InputBox& box;
  const UpdateRule& rule;
  rng::Stream stream;

  explicit Optimizer(const InputBox& b, const UpdateRule& r, std::uint64_t seed)
      : box(b), rule(r), stream(seed) {}

  std::vector<Eigen::VectorXd> initial(int population) {
    std::vector<Eigen::VectorXd> pop;
    pop.reserve(static_cast<std::size_t>(population));
    for (int i = 0; i < population; ++i) pop.push_back(box.sample(stream));
    return pop;
  }

  void update(std::vector<Eigen::VectorXd>& pop, const Eigen::VectorXd& best) {
    const int n = static_cast<int>(pop.size());
    for (int i = 0; i < n; ++i) {
      const int r1 = stream.below(n);
      const int r2 = stream.below(n);
      UpdateContext ctx{best, pop[static_cast<std::size_t>(r1)], pop[static_cast<std::size_t>(r2)],
                        box.lo, box.hi, stream};
      Eigen::VectorXd moved = rule(pop[static_cast<std::size_t>(i)], ctx);
      pop[static_cast<std::size_t>(i)] = box.clip(std::move(moved));
    }
  }
};

}  // namespace

SbtgResult sbtg(const Model& m, const MutantModel& mut, const StlFormula& phi, const SimConfig& cfg,
                int q_t, const SearchBudget& budget, const PenaltyWeights* weights,
                const UpdateRule* rule) {
  if (q_t < 1) throw Error("q_t must be >= 1");
  const Simulator orig(m, cfg);
  const Simulator mutated(mut.model, cfg);
  const PenaltyWeights w = weights ? *weights : PenaltyWeights::defaults_for(orig.flat_model());
  const UpdateRule update = rule ? *rule : default_update_rule();
  const InputBox box = InputBox::of(orig.flat_model(), q_t);
  Optimizer opt(box, update, budget.seed);

  SbtgResult result;
  const auto started = std::chrono::steady_clock::now();
  auto timed_out = [&] {
    if (!budget.wall_clock_limit) return false;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    return elapsed.count() >= *budget.wall_clock_limit;
  };

  std::vector<Eigen::VectorXd> population = opt.initial(budget.population_size);
  Eigen::VectorXd best_vec;
  double best_value = kNegInf;
  FitnessBreakdown best_breakdown;
  best_breakdown.penalized_value = kNegInf;

  auto evaluate = [&](const std::vector<Eigen::VectorXd>& pop) {
    for (const auto& cand : pop) {
      const FitnessBreakdown fb =
          fitness(box.to_test(cand), orig, mutated, mut.mutated_signal, phi, w);
      result.log.evaluations++;
      if (fb.penalized_value > best_value || best_vec.size() == 0) {
        best_value = fb.penalized_value;
        best_breakdown = fb;
        best_vec = cand;
      }
    }
  };

  evaluate(population);
  result.log.best_by_iteration.push_back(best_value);

  for (int iter = 0; iter < budget.max_iterations; ++iter) {
    if (best_breakdown.feasible || timed_out()) break;
    opt.update(population, best_vec);
    evaluate(population);
    result.log.best_by_iteration.push_back(best_value);
  }

  result.best = best_breakdown;
  if (best_breakdown.feasible) result.test = box.to_test(best_vec);
  return result;
}

std::vector<TestCase> art_generate(const Model& m, const SimConfig& cfg, int n,
                                   int candidates_per_pick, std::uint64_t seed, int q_t) {
  (void)cfg;  // geometry only; tests are not simulated here
  if (n < 1) throw Error("art_generate needs n >= 1");
  if (candidates_per_pick < 1) throw Error("art_generate needs candidates_per_pick >= 1");
  const Model flat = flatten(m);
  const InputBox box = InputBox::of(flat, q_t);
  rng::Stream stream(seed);

  const Eigen::VectorXd span = (box.hi - box.lo).cwiseMax(1e-300);
  auto normalized = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return (v - box.lo).cwiseQuotient(span);
  };

  std::vector<Eigen::VectorXd> picked_norm;
  std::vector<TestCase> suite;
  suite.reserve(static_cast<std::size_t>(n));

  Eigen::VectorXd first = box.sample(stream);
  picked_norm.push_back(normalized(first));
  suite.push_back(box.to_test(first));

  for (int t = 1; t < n; ++t) {
    Eigen::VectorXd best_cand;
    double best_score = -1.0;
    for (int c = 0; c < candidates_per_pick; ++c) {
      const Eigen::VectorXd cand = box.sample(stream);
      const Eigen::VectorXd cn = normalized(cand);
      double score = std::numeric_limits<double>::infinity();
      for (const auto& p : picked_norm) score = std::min(score, (cn - p).norm());
      if (score > best_score) {
        best_score = score;
        best_cand = cand;
      }
    }
    picked_norm.push_back(normalized(best_cand));
    suite.push_back(box.to_test(best_cand));
  }
  return suite;
}

std::optional<TestCase> falsify(const MutantModel& mut, const StlFormula& phi, const SimConfig& cfg,
                                int q_t, const SearchBudget& budget) {
  if (q_t < 1) throw Error("q_t must be >= 1");
  const Simulator mutated(mut.model, cfg);
  const InputBox box = InputBox::of(mutated.flat_model(), q_t);
  const UpdateRule update = default_update_rule();
  Optimizer opt(box, update, budget.seed);

  std::vector<Eigen::VectorXd> population = opt.initial(budget.population_size);
  Eigen::VectorXd best_vec;
  double best_obj = kNegInf;  // objective: -rho_mut
  bool violated = false;

  auto evaluate = [&](const std::vector<Eigen::VectorXd>& pop) {
    for (const auto& cand : pop) {
      double obj;
      try {
        const Trace trace = mutated.run(box.to_test(cand));
        const double rho = robustness(trace, phi, cfg).value;
        obj = -rho;
        if (rho < 0.0) violated = true;
      } catch (const NonFiniteSignal&) {
        obj = kNegInf;  // non-finite runs are reported, never counted as violations
      }
      if (obj > best_obj || best_vec.size() == 0) {
        best_obj = obj;
        best_vec = cand;
      }
      if (violated) break;
    }
  };

  evaluate(population);
  for (int iter = 0; iter < budget.max_iterations && !violated; ++iter) {
    opt.update(population, best_vec);
    evaluate(population);
  }
  if (!violated) return std::nullopt;
  return box.to_test(best_vec);
}

GridSpec uniform_grid(const Model& model, int q_t, int levels_per_input) {
  if (levels_per_input < 1) throw Error("grid needs at least one level per input");
  GridSpec grid;
  grid.q_t = q_t;
  for (const auto* b : flatten(model).input_blocks()) {
    const auto& p = std::get<InputParams>(b->params);
    std::vector<double> levels;
    if (levels_per_input == 1) {
      levels.push_back(0.5 * (p.lo + p.hi));
    } else {
      for (int i = 0; i < levels_per_input; ++i)
        levels.push_back(p.lo + (p.hi - p.lo) * i / (levels_per_input - 1));
    }
    grid.levels.push_back(std::move(levels));
  }
  return grid;
}

BruteForceResult brute_force_phi_killable(const Model& m, const MutantModel& mut,
                                          const StlFormula& phi, const SimConfig& cfg,
                                          const GridSpec& grid) {
  const Simulator orig(m, cfg);
  const Simulator mutated(mut.model, cfg);
  const int n_inputs = static_cast<int>(grid.levels.size());
  if (n_inputs != static_cast<int>(orig.flat_model().input_blocks().size()))
    throw Error("grid levels do not match model inputs");

  const int dims = n_inputs * grid.q_t;
  double total = 1.0;
  for (int d = 0; d < dims; ++d) {
    total *= static_cast<double>(grid.levels[static_cast<std::size_t>(d / grid.q_t)].size());
    if (total > static_cast<double>(grid.cap))
      throw GridTooLarge("grid has more than " + std::to_string(grid.cap) + " tests");
  }

  BruteForceResult result;
  std::vector<std::size_t> digit(static_cast<std::size_t>(dims), 0);
  TestCase t;
  t.controls.resize(n_inputs, grid.q_t);
  while (true) {
    for (int d = 0; d < dims; ++d)
      t.controls(d / grid.q_t, d % grid.q_t) =
          grid.levels[static_cast<std::size_t>(d / grid.q_t)][digit[static_cast<std::size_t>(d)]];
    ++result.tested;
    try {
      const Trace to = orig.run(t);
      const double rho_o = robustness(to, phi, cfg).value;
      if (rho_o > 0.0) {
        const Trace tm = mutated.run(t);
        if (robustness(tm, phi, cfg).value < 0.0) {
          result.killable = true;
          result.witness = t;
          return result;
        }
      }
    } catch (const NonFiniteSignal&) {
      // a non-finite run cannot witness a phi-kill
    }

    int d = 0;
    for (; d < dims; ++d) {
      const std::size_t base = grid.levels[static_cast<std::size_t>(d / grid.q_t)].size();
      if (++digit[static_cast<std::size_t>(d)] < base) break;
      digit[static_cast<std::size_t>(d)] = 0;
    }
    if (d == dims) break;
  }
  return result;
}

std::string suite_to_json(const std::vector<SuiteEntry>& suite,
                          const std::vector<std::string>& input_names, int q_t) {
  json j;
  j["schema"] = "pbmt-suite/1";
  j["q_t"] = q_t;
  j["inputs"] = input_names;
  j["tests"] = json::array();
  for (const auto& e : suite) {
    json t;
    t["id"] = e.id;
    t["strategy"] = e.strategy;
    t["seed"] = e.seed;
    if (!e.target_mutant.empty()) t["target_mutant"] = e.target_mutant;
    json controls = json::object();
    for (std::size_t i = 0; i < input_names.size(); ++i) {
      json row = json::array();
      for (int c = 0; c < e.test.controls.cols(); ++c)
        row.push_back(e.test.controls(static_cast<long>(i), c));
      controls[input_names[i]] = std::move(row);
    }
    t["controls"] = std::move(controls);
    j["tests"].push_back(std::move(t));
  }
  return j.dump(2) + "\n";
}

std::vector<SuiteEntry> suite_from_json(const std::string& json_text,
                                        const std::vector<std::string>& input_names) {
  const json j = json::parse(json_text);
  if (j.value("schema", "") != "pbmt-suite/1") throw Error("unexpected suite schema");
  std::vector<SuiteEntry> out;
  for (const auto& t : j.at("tests")) {
    SuiteEntry e;
    e.id = t.at("id").get<std::string>();
    e.strategy = t.value("strategy", "manual");
    e.seed = t.value("seed", 0ULL);
    e.target_mutant = t.value("target_mutant", "");
    const auto& controls = t.at("controls");
    long q = -1;
    for (std::size_t i = 0; i < input_names.size(); ++i) {
      const auto& row = controls.at(input_names[i]);
      if (q < 0) {
        q = static_cast<long>(row.size());
        e.test.controls.resize(static_cast<long>(input_names.size()), q);
      }
      if (static_cast<long>(row.size()) != q) throw Error("ragged control rows in suite");
      for (long c = 0; c < q; ++c)
        e.test.controls(static_cast<long>(i), c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace pbmt
