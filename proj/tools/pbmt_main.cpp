// pbmt - property-based mutation testing toolkit for dataflow models.
//
// Subcommands: validate, simulate, mutate, campaign, reduce, plot-data.
// Errors print one machine-readable JSON object to stderr and exit nonzero.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pbmt/campaign.hpp"
#include "pbmt/dsl.hpp"
#include "pbmt/errors.hpp"

using nlohmann::json;

namespace {

int fail(const std::string& code, const std::string& message) {
  json err;
  err["error"] = code;
  err["message"] = message;
  std::cerr << err.dump() << "\n";
  return 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pbmt::Error("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

pbmt::TestCase load_test_file(const std::string& path, const pbmt::Model& model) {
  const json j = json::parse(read_file(path));
  if (j.value("schema", "") != "pbmt-test/1")
    throw pbmt::ConfigError("test file schema must be pbmt-test/1");
  const auto& controls = j.at("controls");
  const auto inputs = model.input_blocks();
  pbmt::TestCase t;
  long q = -1;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& row = controls.at(inputs[i]->id);
    if (q < 0) {
      q = static_cast<long>(row.size());
      t.controls.resize(static_cast<long>(inputs.size()), q);
    }
    if (static_cast<long>(row.size()) != q)
      throw pbmt::ConfigError("all inputs need the same number of control values");
    for (long c = 0; c < q; ++c) t.controls(static_cast<long>(i), c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (q < 1) throw pbmt::ConfigError("test file defines no control values");
  return t;
}

int cmd_validate(const std::string& model_path) {
  const pbmt::Model model = pbmt::parse_model_file(model_path);
  const auto diags = pbmt::validate_model(model);
  json out = json::array();
  for (const auto& d : diags) out.push_back({{"code", d.code}, {"element", d.element}, {"message", d.message}});
  std::cout << out.dump(2) << "\n";
  return diags.empty() ? 0 : 1;
}

int cmd_simulate(const std::string& model_path, const std::string& test_path, double sample_time,
                 double horizon, const std::string& out_path) {
  const pbmt::Model model = pbmt::parse_model_file(model_path);
  const pbmt::SimConfig cfg{sample_time, horizon};
  const pbmt::Simulator sim(model, cfg);
  const pbmt::TestCase test = load_test_file(test_path, sim.flat_model());
  const pbmt::Trace trace = sim.run(test);

  std::ostringstream csv;
  csv << "time";
  for (const auto& name : trace.names) csv << "," << name;
  csv << "\n";
  csv.precision(17);
  for (int j = 0; j < trace.rows(); ++j) {
    csv << trace.times[j];
    for (std::size_t s = 0; s < trace.names.size(); ++s)
      csv << "," << trace.values(j, static_cast<long>(s));
    csv << "\n";
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw pbmt::Error("cannot write " + out_path);
    out << csv.str();
    std::cout << "trace written to " << out_path << "\n";
  }
  return 0;
}

int cmd_mutate(const std::string& model_path, const std::string& ops_arg, std::uint64_t seed,
               double sample_time, double horizon, const std::string& manifest_path,
               const std::string& emit_dir) {
  pbmt::Model model = pbmt::parse_model_file(model_path);
  const auto diags = pbmt::validate_model(model);
  if (!diags.empty()) return fail("ModelError", "model invalid: " + diags.front().str());
  model = pbmt::flatten(model);

  std::vector<pbmt::MutationOp> ops;
  if (ops_arg == "all") {
    ops = pbmt::all_mutation_ops();
  } else {
    std::stringstream ss(ops_arg);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) ops.push_back(pbmt::mutation_op_from_string(item));
  }

  const pbmt::SimConfig cfg{sample_time, horizon};
  const auto generated = pbmt::generate_mutants(model, ops, seed, cfg);
  pbmt::write_manifest(generated, model.name, seed, manifest_path);
  std::cout << "mutants: " << generated.records.size() << " (" << generated.mutants.size()
            << " valid) -> " << manifest_path << "\n";

  if (!emit_dir.empty()) {
    std::filesystem::create_directories(emit_dir);
    for (const auto& m : generated.mutants)
      pbmt::write_model_file(m.model,
                             (std::filesystem::path(emit_dir) / (m.descriptor.id + ".dfm")).string());
    std::cout << "mutant models -> " << emit_dir << "\n";
  }
  return 0;
}

int cmd_campaign(const std::string& config_path) {
  const pbmt::CampaignConfig cfg = pbmt::load_campaign_config(config_path);
  const pbmt::CampaignResult result = pbmt::run_campaign(cfg);
  pbmt::write_campaign_outputs(result, cfg);

  std::cout << "campaign: " << result.model.name << "\n";
  std::cout << "  mutants: " << result.mutants.records.size() << " ("
            << result.mutants.mutants.size() << " valid)\n";
  std::cout << "  tests:   " << result.suite.size() << "\n";
  for (const auto& [name, score] : result.scores) {
    std::cout << "  " << name << ": killed " << score.killed << "/" << score.killable;
    if (score.killable) std::cout << " (MS " << pbmt::format_percent(score.ms()) << "%)";
    std::cout << ", phi-killed " << score.phi_killed << "/" << score.phi_killable;
    if (score.phi_killable)
      std::cout << " (MS_phi " << pbmt::format_percent(score.ms_phi()) << "%)";
    std::cout << "\n";
  }
  std::cout << "  report -> " << cfg.output_dir << "/report.json\n";
  return 0;
}

int cmd_reduce(const std::string& matrix_path) {
  const pbmt::KillMatrix km = pbmt::kill_matrix_from_csv(read_file(matrix_path));
  json out = pbmt::greedy_reduce(km);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_plot_data(const std::string& report_dir, const std::string& mutant_id,
                  const std::string& test_id, const std::string& out_path) {
  const std::string csv = pbmt::emit_plot_data(report_dir, mutant_id, test_id);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw pbmt::Error("cannot write " + out_path);
    out << csv;
    std::cout << "plot data written to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pbmt - property-based mutation testing for dataflow models"};
  app.require_subcommand(1);

  std::string model_path, test_path, out_path, ops_arg = "all", manifest_path = "manifest.json";
  std::string emit_dir, config_path, matrix_path, report_dir, mutant_id, test_id;
  double sample_time = 0.1, horizon = 10.0;
  std::uint64_t seed = 1;

  auto* validate = app.add_subcommand("validate", "check a model file against the invariants");
  validate->add_option("model", model_path, "model file (.dfm)")->required();

  auto* simulate = app.add_subcommand("simulate", "run one test and print the trace CSV");
  simulate->add_option("model", model_path)->required();
  simulate->add_option("test", test_path, "test file (pbmt-test/1 JSON)")->required();
  simulate->add_option("--sample-time", sample_time)->required();
  simulate->add_option("--horizon", horizon)->required();
  simulate->add_option("--out", out_path, "write CSV here instead of stdout");

  auto* mutate = app.add_subcommand("mutate", "generate first-order mutants and a manifest");
  mutate->add_option("model", model_path)->required();
  mutate->add_option("--ops", ops_arg, "comma list or 'all'");
  mutate->add_option("--seed", seed, "master seed");
  mutate->add_option("--sample-time", sample_time)->required();
  mutate->add_option("--horizon", horizon)->required();
  mutate->add_option("--manifest", manifest_path, "manifest output path");
  mutate->add_option("--emit-dir", emit_dir, "also write each mutant .dfm here");

  auto* campaign = app.add_subcommand("campaign", "run a full campaign from a JSON config");
  campaign->add_option("config", config_path)->required();

  auto* reduce = app.add_subcommand("reduce", "greedy phi-kill-preserving suite reduction");
  reduce->add_option("kill_matrix", matrix_path, "kill_matrix.csv from a campaign")->required();

  auto* plot = app.add_subcommand("plot-data", "original-vs-mutant output CSV for one cell");
  plot->add_option("report_dir", report_dir)->required();
  plot->add_option("mutant", mutant_id)->required();
  plot->add_option("test", test_id)->required();
  plot->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(model_path);
    if (simulate->parsed())
      return cmd_simulate(model_path, test_path, sample_time, horizon, out_path);
    if (mutate->parsed())
      return cmd_mutate(model_path, ops_arg, seed, sample_time, horizon, manifest_path, emit_dir);
    if (campaign->parsed()) return cmd_campaign(config_path);
    if (reduce->parsed()) return cmd_reduce(matrix_path);
    if (plot->parsed()) return cmd_plot_data(report_dir, mutant_id, test_id, out_path);
  } catch (const pbmt::ParseError& e) {
    return fail(e.code(), e.what());
  } catch (const pbmt::ConfigError& e) {
    return fail("ConfigError", e.what());
  } catch (const pbmt::ModelError& e) {
    return fail("ModelError", e.what());
  } catch (const pbmt::NonFiniteSignal& e) {
    return fail("NonFiniteSignal", e.what());
  } catch (const pbmt::UnknownCell& e) {
    return fail("UnknownCell", e.what());
  } catch (const pbmt::Error& e) {
    return fail("Error", e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
  return 0;
}
