#include "pbmt/campaign.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pbmt/dsl.hpp"
#include "pbmt/errors.hpp"
#include "pbmt/rng.hpp"

namespace pbmt {

namespace fs = std::filesystem;
using nlohmann::json;

int effective_parallelism(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("PBMT_PARALLELISM")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

namespace {

// Index-sharded worker pool. Results must be written to per-index slots so
// scheduling cannot influence the outcome.
void parallel_for(std::size_t count, int degree, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (degree <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(degree), count);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

CampaignConfig load_campaign_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("bad config json: " + std::string(e.what()));
  }
  if (j.value("schema", "") != "pbmt-campaign/1")
    throw ConfigError("config schema must be pbmt-campaign/1");

  CampaignConfig cfg;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return (base / p).lexically_normal().string(); };

  try {
    cfg.model_path = resolve(j.at("model").get<std::string>());
    cfg.property_path = resolve(j.at("property").get<std::string>());
    cfg.sim.sample_time = j.at("sim").at("sample_time").get<double>();
    cfg.sim.horizon = j.at("sim").at("horizon").get<double>();
    cfg.master_seed = j.value("master_seed", 1ULL);
    cfg.tolerance = j.value("tolerance", 0.0);
    cfg.output_dir = resolve(j.value("output_dir", "out"));
    cfg.parallelism = j.value("parallelism", 0);

    if (j.contains("operators") && j["operators"].is_array()) {
      for (const auto& name : j["operators"])
        cfg.operators.push_back(mutation_op_from_string(name.get<std::string>()));
    }
    if (j.contains("mutation_defaults")) {
      const auto& d = j["mutation_defaults"];
      cfg.mutation_defaults.bias_rel = d.value("bias_rel", cfg.mutation_defaults.bias_rel);
      cfg.mutation_defaults.noise_rel = d.value("noise_rel", cfg.mutation_defaults.noise_rel);
      cfg.mutation_defaults.drop_prob = d.value("drop_prob", cfg.mutation_defaults.drop_prob);
      if (d.contains("time_delays"))
        cfg.mutation_defaults.time_delays = d["time_delays"].get<std::vector<int>>();
    }
    const auto& s = j.at("strategies");
    if (s.contains("art")) {
      const auto& a = s["art"];
      cfg.art.enabled = true;
      cfg.art.n = a.value("n", cfg.art.n);
      cfg.art.candidates_per_pick = a.value("candidates_per_pick", cfg.art.candidates_per_pick);
      cfg.art.q_t = a.value("q_t", cfg.art.q_t);
      cfg.art.seed = a.value("seed", cfg.art.seed);
    }
    if (s.contains("ft")) {
      const auto& f = s["ft"];
      cfg.ft.enabled = true;
      cfg.ft.population = f.value("population", cfg.ft.population);
      cfg.ft.max_iterations = f.value("max_iterations", cfg.ft.max_iterations);
      cfg.ft.q_t = f.value("q_t", cfg.ft.q_t);
      cfg.ft.seed = f.value("seed", cfg.ft.seed);
    }
    if (s.contains("sbtg")) {
      const auto& g = s["sbtg"];
      cfg.sbtg.enabled = true;
      cfg.sbtg.runs = g.value("runs", cfg.sbtg.runs);
      cfg.sbtg.population = g.value("population", cfg.sbtg.population);
      cfg.sbtg.max_iterations = g.value("max_iterations", cfg.sbtg.max_iterations);
      cfg.sbtg.q_t = g.value("q_t", cfg.sbtg.q_t);
      cfg.sbtg.seed = g.value("seed", cfg.sbtg.seed);
      if (g.contains("w1")) cfg.sbtg.w1 = g["w1"].get<double>();
      if (g.contains("w2")) cfg.sbtg.w2 = g["w2"].get<double>();
    }
    if (s.contains("oracle")) {
      const auto& o = s["oracle"];
      cfg.oracle.enabled = true;
      cfg.oracle.q_t = o.value("q_t", cfg.oracle.q_t);
      cfg.oracle.levels = o.value("levels", cfg.oracle.levels);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config field error: " + std::string(e.what()));
  }

  if (!fs::exists(cfg.model_path)) throw ConfigError("model file not found: " + cfg.model_path);
  if (!fs::exists(cfg.property_path))
    throw ConfigError("property file not found: " + cfg.property_path);
  if (cfg.art.enabled && (cfg.art.q_t < 1 || cfg.art.n < 1))
    throw ConfigError("art needs q_t >= 1 and n >= 1");
  if (cfg.ft.enabled && cfg.ft.q_t < 1) throw ConfigError("ft q_t must be >= 1");
  if (cfg.sbtg.enabled && (cfg.sbtg.q_t < 1 || cfg.sbtg.runs < 1))
    throw ConfigError("sbtg needs q_t >= 1 and runs >= 1");
  if (cfg.oracle.enabled && (cfg.oracle.q_t < 1 || cfg.oracle.levels < 1))
    throw ConfigError("oracle needs q_t >= 1 and levels >= 1");
  return cfg;
}

namespace {

json config_echo(const CampaignConfig& cfg, const std::vector<MutationOp>& ops) {
  // Deliberately omits output_dir and parallelism: neither may influence
  // report bytes.
  json c;
  c["model"] = fs::path(cfg.model_path).filename().string();
  c["property"] = fs::path(cfg.property_path).filename().string();
  c["sim"] = {{"sample_time", cfg.sim.sample_time}, {"horizon", cfg.sim.horizon}};
  c["master_seed"] = cfg.master_seed;
  c["tolerance"] = cfg.tolerance;
  json opnames = json::array();
  for (MutationOp op : ops) opnames.push_back(to_string(op));
  c["operators"] = std::move(opnames);
  json strategies;
  if (cfg.art.enabled)
    strategies["art"] = {{"n", cfg.art.n},
                         {"candidates_per_pick", cfg.art.candidates_per_pick},
                         {"q_t", cfg.art.q_t},
                         {"seed", cfg.art.seed}};
  if (cfg.ft.enabled)
    strategies["ft"] = {{"population", cfg.ft.population},
                        {"max_iterations", cfg.ft.max_iterations},
                        {"q_t", cfg.ft.q_t},
                        {"seed", cfg.ft.seed}};
  if (cfg.sbtg.enabled)
    strategies["sbtg"] = {{"runs", cfg.sbtg.runs},
                          {"population", cfg.sbtg.population},
                          {"max_iterations", cfg.sbtg.max_iterations},
                          {"q_t", cfg.sbtg.q_t},
                          {"seed", cfg.sbtg.seed}};
  if (cfg.oracle.enabled)
    strategies["oracle"] = {{"q_t", cfg.oracle.q_t}, {"levels", cfg.oracle.levels}};
  c["strategies"] = std::move(strategies);
  return c;
}

json score_to_json(const ScoreReport& r) {
  json s;
  s["mutants"] = r.mutants_total;
  s["invalid"] = r.invalid;
  s["valid"] = r.valid;
  s["equivalent"] = r.equivalent;
  s["killable"] = r.killable;
  s["killed"] = r.killed;
  s["phi_killable"] = r.phi_killable;
  s["phi_killed"] = r.phi_killed;
  s["ms_percent"] = r.killable ? json(format_percent(r.ms())) : json();
  s["ms_phi_percent"] = r.phi_killable ? json(format_percent(r.ms_phi())) : json();
  return s;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  CampaignResult R;

  Model parsed = parse_model_file(cfg.model_path);
  {
    const auto diags = validate_model(parsed);
    if (!diags.empty()) {
      std::string msg = "model invalid:";
      for (const auto& d : diags) msg += "\n  " + d.str();
      throw ModelError(msg);
    }
  }
  R.model = flatten(parsed);
  R.property = parse_stl_file(cfg.property_path, R.model);

  const std::vector<MutationOp> ops = cfg.operators.empty() ? all_mutation_ops() : cfg.operators;
  const auto t_gen = std::chrono::steady_clock::now();
  R.mutants = generate_mutants(R.model, ops, cfg.master_seed, cfg.sim, cfg.mutation_defaults);
  R.generation_seconds = seconds_since(t_gen);

  const int degree = effective_parallelism(cfg.parallelism);
  const Simulator orig(R.model, cfg.sim);

  const std::size_t n_valid = R.mutants.mutants.size();
  std::vector<Simulator> mutant_sims;
  mutant_sims.reserve(n_valid);
  for (const auto& m : R.mutants.mutants) mutant_sims.emplace_back(m.model, cfg.sim);

  std::vector<std::string> input_names, output_names;
  for (const auto* b : R.model.input_blocks()) input_names.push_back(b->id);
  for (const auto* b : R.model.output_blocks()) output_names.push_back(b->id);

  const auto t_exec = std::chrono::steady_clock::now();

  // ---- Test suites ----
  if (cfg.art.enabled) {
    const auto tests =
        art_generate(R.model, cfg.sim, cfg.art.n, cfg.art.candidates_per_pick, cfg.art.seed,
                     cfg.art.q_t);
    for (std::size_t i = 0; i < tests.size(); ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "art-%03zu", i);
      R.suite.push_back({buf, "art", "", cfg.art.seed, tests[i]});
    }
  }

  if (cfg.ft.enabled) {
    std::vector<std::optional<TestCase>> found(n_valid);
    std::vector<std::uint64_t> seeds(n_valid);
    parallel_for(n_valid, degree, [&](std::size_t i) {
      SearchBudget budget;
      budget.population_size = cfg.ft.population;
      budget.max_iterations = cfg.ft.max_iterations;
      budget.seed = rng::mix(cfg.ft.seed, static_cast<std::uint64_t>(i));
      seeds[i] = budget.seed;
      found[i] = falsify(R.mutants.mutants[i], *R.property, cfg.sim, cfg.ft.q_t, budget);
    });
    for (std::size_t i = 0; i < n_valid; ++i) {
      if (!found[i]) continue;
      const std::string& mid = R.mutants.mutants[i].descriptor.id;
      R.suite.push_back({"ft-" + mid, "ft", mid, seeds[i], *found[i]});
    }
  }

  if (cfg.sbtg.enabled) {
    PenaltyWeights weights = PenaltyWeights::defaults_for(R.model);
    if (cfg.sbtg.w1) weights.w1 = *cfg.sbtg.w1;
    if (cfg.sbtg.w2) weights.w2 = *cfg.sbtg.w2;
    std::vector<SbtgOutcome> outcomes(n_valid);
    std::vector<std::optional<TestCase>> found(n_valid);
    std::vector<std::uint64_t> seeds(n_valid, 0);
    parallel_for(n_valid, degree, [&](std::size_t i) {
      SbtgOutcome outcome;
      for (int run = 0; run < cfg.sbtg.runs; ++run) {
        SearchBudget budget;
        budget.population_size = cfg.sbtg.population;
        budget.max_iterations = cfg.sbtg.max_iterations;
        budget.seed = rng::mix(rng::mix(cfg.sbtg.seed, static_cast<std::uint64_t>(i)),
                               static_cast<std::uint64_t>(run));
        SbtgResult r = sbtg(R.model, R.mutants.mutants[i], *R.property, cfg.sim, cfg.sbtg.q_t,
                            budget, &weights);
        outcome.runs_attempted = run + 1;
        outcome.log = std::move(r.log);
        if (r.test) {
          outcome.found = true;
          seeds[i] = budget.seed;
          found[i] = std::move(r.test);
          break;
        }
      }
      outcomes[i] = std::move(outcome);
    });
    for (std::size_t i = 0; i < n_valid; ++i) {
      const std::string& mid = R.mutants.mutants[i].descriptor.id;
      R.sbtg_outcomes[mid] = std::move(outcomes[i]);
      if (found[i]) R.suite.push_back({"sbtg-" + mid, "sbtg", mid, seeds[i], *found[i]});
    }
  }

  if (cfg.oracle.enabled) {
    const GridSpec grid = uniform_grid(R.model, cfg.oracle.q_t, cfg.oracle.levels);
    std::vector<BruteForceResult> verdicts(n_valid);
    parallel_for(n_valid, degree, [&](std::size_t i) {
      verdicts[i] = brute_force_phi_killable(R.model, R.mutants.mutants[i], *R.property, cfg.sim, grid);
    });
    for (std::size_t i = 0; i < n_valid; ++i)
      R.oracle_verdicts[R.mutants.mutants[i].descriptor.id] = std::move(verdicts[i]);
  }

  // ---- Kill matrix: full (test x mutant) cross product ----
  KillMatrix& km = R.matrix;
  for (const auto& e : R.suite) km.test_ids.push_back(e.id);
  std::vector<int> valid_col(n_valid, -1);
  {
    std::size_t valid_seen = 0;
    for (const auto& rec : R.mutants.records) {
      MutantColumn col;
      col.id = rec.descriptor.id;
      col.op = rec.descriptor.op;
      if (!rec.valid) {
        col.label = MutantLabel::Invalid;
        col.provenance = LabelProvenance::Assumed;
        col.note = "failed validation at generation";
      }
      if (rec.valid) valid_col[valid_seen++] = static_cast<int>(km.mutants.size());
      km.mutants.push_back(std::move(col));
    }
  }
  km.resize_cells();

  const std::size_t n_tests = R.suite.size();
  std::vector<std::optional<Trace>> orig_traces(n_tests);
  std::vector<std::string> orig_failures(n_tests);
  parallel_for(n_tests, degree, [&](std::size_t t) {
    try {
      orig_traces[t] = orig.run(R.suite[t].test);
    } catch (const NonFiniteSignal& e) {
      orig_failures[t] = e.what();
    }
  });

  parallel_for(n_tests * n_valid, degree, [&](std::size_t job) {
    const std::size_t t = job / n_valid;
    const std::size_t m = job % n_valid;
    KillVerdict verdict;
    if (!orig_traces[t]) {
      verdict.sim_failed = true;
    } else {
      try {
        const Trace mut_trace = mutant_sims[m].run(R.suite[t].test);
        verdict = classify(*orig_traces[t], mut_trace, R.mutants.mutants[m].mutated_signal,
                           output_names, *R.property, cfg.sim, cfg.tolerance);
      } catch (const NonFiniteSignal&) {
        verdict.sim_failed = true;
      }
    }
    km.cell(static_cast<int>(t), valid_col[m]) = verdict;
  });

  // ---- Labels ----
  for (std::size_t m = 0; m < n_valid; ++m) {
    MutantColumn& col = km.mutants[static_cast<std::size_t>(valid_col[m])];
    const std::string& mid = col.id;

    std::string first_phi_killer;
    bool ever_weak = false;
    bool ever_failed = false;
    for (std::size_t t = 0; t < n_tests; ++t) {
      const KillVerdict& v = km.cell(static_cast<int>(t), valid_col[m]);
      if (v.phi && first_phi_killer.empty()) first_phi_killer = km.test_ids[t];
      ever_weak = ever_weak || v.weak;
      ever_failed = ever_failed || v.sim_failed;
    }

    if (!first_phi_killer.empty()) {
      col.label = MutantLabel::NtdPhi;
      col.provenance = LabelProvenance::Kill;
      col.note = "phi-killed by " + first_phi_killer;
      continue;
    }
    const auto oracle_it = R.oracle_verdicts.find(mid);
    if (oracle_it != R.oracle_verdicts.end() && oracle_it->second.killable) {
      col.label = MutantLabel::NtdPhi;
      col.provenance = LabelProvenance::Oracle;
      col.note = "killable-on-grid, missed by the executed suite";
      continue;
    }
    const bool distinguishable = ever_weak || ever_failed;
    if (oracle_it != R.oracle_verdicts.end()) {
      col.label = distinguishable ? MutantLabel::PhiTriviallyDifferent : MutantLabel::Equivalent;
      col.provenance = LabelProvenance::Oracle;
      col.note = "not killable on the " + std::to_string(oracle_it->second.tested) + "-test grid";
      continue;
    }
    const auto sbtg_it = R.sbtg_outcomes.find(mid);
    if (sbtg_it != R.sbtg_outcomes.end() && !sbtg_it->second.found) {
      col.label = distinguishable ? MutantLabel::PhiTriviallyDifferent : MutantLabel::Equivalent;
      col.provenance = LabelProvenance::SbtgExhausted;
      col.note = std::to_string(sbtg_it->second.runs_attempted) + " failed independent runs";
      continue;
    }
    col.label = MutantLabel::NtdPhi;
    col.provenance = LabelProvenance::Assumed;
    col.note = "no trivially-different evidence; counted killable";
  }

  // ---- Scores, reduction, subsumption ----
  auto strategy_rows = [&](const std::string& prefix) {
    std::vector<std::string> ids;
    for (const auto& e : R.suite)
      if (e.strategy == prefix) ids.push_back(e.id);
    return ids;
  };
  std::vector<std::pair<std::string, KillMatrix>> views;
  if (cfg.art.enabled) views.emplace_back("art", filter_tests(km, strategy_rows("art")));
  if (cfg.ft.enabled) views.emplace_back("ft", filter_tests(km, strategy_rows("ft")));
  if (cfg.sbtg.enabled) views.emplace_back("sbtg", filter_tests(km, strategy_rows("sbtg")));
  views.emplace_back("all", km);
  std::map<std::string, std::vector<std::string>> reduced_strong;
  for (auto& [name, view] : views) {
    R.scores[name] = score_counts(view);
    R.reduced[name] = greedy_reduce(view);
    reduced_strong[name] = greedy_reduce_strong(view);
  }
  R.subsumption = dynamic_subsumption(km);

  R.execution_seconds = seconds_since(t_exec);

  // ---- Deterministic report ----
  json report;
  report["schema"] = "pbmt-report/1";
  report["config"] = config_echo(cfg, ops);
  report["model"] = {{"name", R.model.name},
                     {"inputs", input_names},
                     {"outputs", output_names},
                     {"blocks", R.model.blocks.size()},
                     {"lines", R.model.lines.size()}};

  {
    json mutants;
    mutants["total"] = R.mutants.records.size();
    mutants["valid"] = n_valid;
    mutants["invalid"] = R.mutants.records.size() - n_valid;
    json by_op = json::object();
    for (MutationOp op : ops) {
      int count = 0;
      for (const auto& rec : R.mutants.records)
        if (rec.descriptor.op == op) ++count;
      if (count) by_op[to_string(op)] = count;
    }
    mutants["by_operator"] = std::move(by_op);
    report["mutants"] = std::move(mutants);
  }

  {
    json suites = json::object();
    for (const char* name : {"art", "ft", "sbtg"}) {
      json ids = json::array();
      for (const auto& e : R.suite)
        if (e.strategy == name) ids.push_back(e.id);
      if (!ids.empty()) suites[name] = std::move(ids);
    }
    report["suites"] = std::move(suites);
  }

  {
    json scores = json::object();
    for (const auto& [name, score] : R.scores) scores[name] = score_to_json(score);
    report["scores"] = std::move(scores);
  }

  {
    // Per-operator breakdown over the combined ART+FT rows.
    json per_op = json::array();
    const auto art_rows = strategy_rows("art");
    const auto ft_rows = strategy_rows("ft");
    for (MutationOp op : ops) {
      int generated = 0;
      for (const auto& rec : R.mutants.records)
        if (rec.descriptor.op == op) ++generated;
      if (!generated) continue;

      int td = 0, ntd = 0, phi_art = 0, phi_ft = 0, phi_art_ft = 0;
      for (int c = 0; c < km.cols(); ++c) {
        const MutantColumn& col = km.mutants[static_cast<std::size_t>(c)];
        if (col.op != op || col.label == MutantLabel::Invalid) continue;
        if (is_phi_trivially_different(col.label)) {
          ++td;
          continue;
        }
        ++ntd;
        bool by_art = false, by_ft = false;
        for (std::size_t t = 0; t < n_tests; ++t) {
          if (!km.cell(static_cast<int>(t), c).phi) continue;
          if (R.suite[t].strategy == "art") by_art = true;
          if (R.suite[t].strategy == "ft") by_ft = true;
        }
        if (by_art) ++phi_art;
        if (by_ft) ++phi_ft;
        if (by_art || by_ft) ++phi_art_ft;
      }
      json row;
      row["operator"] = to_string(op);
      row["generated"] = generated;
      row["phi_trivially_different"] = td;
      row["ntd_phi"] = ntd;
      row["ms_phi_art_percent"] =
          (ntd && !art_rows.empty()) ? json(format_percent(static_cast<double>(phi_art) / ntd)) : json();
      row["ms_phi_ft_percent"] =
          (ntd && !ft_rows.empty()) ? json(format_percent(static_cast<double>(phi_ft) / ntd)) : json();
      row["ntd_not_killed_by_art_ft"] = ntd - phi_art_ft;
      per_op.push_back(std::move(row));
    }
    report["per_operator"] = std::move(per_op);
  }

  {
    json labels = json::object();
    json kills = json::object();
    for (int c = 0; c < km.cols(); ++c) {
      const MutantColumn& col = km.mutants[static_cast<std::size_t>(c)];
      labels[col.id] = {{"label", to_string(col.label)},
                        {"provenance", to_string(col.provenance)},
                        {"note", col.note}};
      if (col.label == MutantLabel::Invalid) continue;
      json killed_by = json::array(), phi_killed_by = json::array();
      for (std::size_t t = 0; t < n_tests; ++t) {
        const KillVerdict& v = km.cell(static_cast<int>(t), c);
        if (v.strong) killed_by.push_back(km.test_ids[t]);
        if (v.phi) phi_killed_by.push_back(km.test_ids[t]);
      }
      kills[col.id] = {{"killed_by", std::move(killed_by)},
                       {"phi_killed_by", std::move(phi_killed_by)}};
    }
    report["labels"] = std::move(labels);
    report["kills"] = std::move(kills);
  }

  {
    json reduced = json::object();
    for (const auto& [name, ids] : R.reduced) reduced[name] = ids;
    report["reduced"] = std::move(reduced);
    json reduced_s = json::object();
    for (const auto& [name, ids] : reduced_strong) reduced_s[name] = ids;
    report["reduced_strong_kill"] = std::move(reduced_s);

    json subsumption;
    json groups = json::array();
    for (const auto& group : R.subsumption.duplicate_groups) {
      json ids = json::array();
      for (int m : group) ids.push_back(km.mutants[static_cast<std::size_t>(m)].id);
      groups.push_back(std::move(ids));
    }
    json pairs = json::array();
    for (const auto& [i, j2] : R.subsumption.subsumes)
      pairs.push_back({km.mutants[static_cast<std::size_t>(i)].id,
                       km.mutants[static_cast<std::size_t>(j2)].id});
    subsumption["duplicate_groups"] = std::move(groups);
    subsumption["subsumes"] = std::move(pairs);
    report["subsumption"] = std::move(subsumption);
  }

  if (cfg.sbtg.enabled) {
    json sb = json::object();
    for (const auto& [mid, outcome] : R.sbtg_outcomes) {
      sb[mid] = {{"runs", outcome.runs_attempted},
                 {"found", outcome.found},
                 {"best_by_iteration", outcome.log.best_by_iteration},
                 {"evaluations", outcome.log.evaluations}};
    }
    report["sbtg"] = std::move(sb);
  }
  if (cfg.oracle.enabled) {
    json oracle = json::object();
    for (const auto& [mid, verdict] : R.oracle_verdicts)
      oracle[mid] = {{"killable_on_grid", verdict.killable}, {"grid_tests", verdict.tested}};
    report["oracle"] = std::move(oracle);
  }

  R.report_json = report.dump(2) + "\n";
  R.total_seconds = seconds_since(t_start);
  return R;
}

void write_campaign_outputs(const CampaignResult& result, const CampaignConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  fs::create_directories(fs::path(cfg.output_dir) / "suites");
  const auto at = [&](const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
  };

  write_text_file(at("report.json"), result.report_json);
  write_text_file(at("kill_matrix.csv"), kill_matrix_to_csv(result.matrix));
  write_text_file(at("manifest.json"),
                  manifest_to_json(result.mutants, result.model.name, cfg.master_seed));
  write_text_file(at("model.dfm"), serialize_model(result.model));
  write_text_file(at("property.stl"), read_text_file(cfg.property_path));

  std::vector<std::string> input_names;
  for (const auto* b : result.model.input_blocks()) input_names.push_back(b->id);
  for (const char* name : {"art", "ft", "sbtg"}) {
    std::vector<SuiteEntry> entries;
    int q_t = 1;
    for (const auto& e : result.suite)
      if (e.strategy == name) {
        entries.push_back(e);
        q_t = e.test.control_points();
      }
    if (!entries.empty())
      write_text_file(at("suites/" + std::string(name) + ".json"),
                      suite_to_json(entries, input_names, q_t));
  }

  json timing;
  timing["generation_seconds"] = result.generation_seconds;
  timing["execution_seconds"] = result.execution_seconds;
  timing["total_seconds"] = result.total_seconds;
  write_text_file(at("timing.json"), timing.dump(2) + "\n");
}

std::string emit_plot_data(const std::string& report_dir, const std::string& mutant_id,
                           const std::string& test_id) {
  const fs::path dir(report_dir);
  const json report = json::parse(read_text_file((dir / "report.json").string()));
  SimConfig cfg;
  cfg.sample_time = report.at("config").at("sim").at("sample_time").get<double>();
  cfg.horizon = report.at("config").at("sim").at("horizon").get<double>();

  const Model model = parse_model_file((dir / "model.dfm").string());

  const auto records = read_manifest((dir / "manifest.json").string());
  const MutantRecord* record = nullptr;
  for (const auto& r : records)
    if (r.descriptor.id == mutant_id) record = &r;
  if (!record) throw UnknownCell("no mutant " + mutant_id + " in campaign");
  if (!record->valid) throw UnknownCell("mutant " + mutant_id + " was invalid, never executed");

  std::vector<std::string> input_names;
  for (const auto* b : model.input_blocks()) input_names.push_back(b->id);
  std::optional<TestCase> test;
  for (const char* name : {"art", "ft", "sbtg"}) {
    const fs::path file = dir / "suites" / (std::string(name) + ".json");
    if (!fs::exists(file)) continue;
    for (auto& e : suite_from_json(read_text_file(file.string()), input_names))
      if (e.id == test_id) test = e.test;
  }
  if (!test) throw UnknownCell("no test " + test_id + " in campaign");

  const StlPtr phi = parse_stl_file((dir / "property.stl").string(), model);
  const MutantModel mutant = apply_mutation(model, record->descriptor);

  const Trace trace_orig = simulate(model, *test, cfg);
  const Trace trace_mut = simulate(mutant.model, *test, cfg);

  const auto predicates = collect_predicates(*phi);
  auto violation_marks = [&](const Trace& trace) {
    std::vector<char> marks(static_cast<std::size_t>(trace.rows()), 0);
    for (const auto* p : predicates) {
      const auto profile = predicate_profile(trace, *p);
      for (std::size_t j = 0; j < profile.size(); ++j)
        if (!profile[j]) marks[j] = 1;
    }
    return marks;
  };

  std::string csv = "time,signal,variant,value,violated\n";
  char buf[96];
  const std::pair<const char*, const Trace*> variants[2] = {{"original", &trace_orig},
                                                            {"mutant", &trace_mut}};
  for (const auto& [variant, trace] : variants) {
    const auto marks = violation_marks(*trace);
    for (const auto* out : model.output_blocks()) {
      const auto col = trace->signal(out->id);
      for (int j = 0; j < trace->rows(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g,%s,%s,%.17g,%d\n", trace->times[j],
                      out->id.c_str(), variant, col[j], marks[static_cast<std::size_t>(j)] ? 1 : 0);
        csv += buf;
      }
    }
  }
  return csv;
}

}  // namespace pbmt
