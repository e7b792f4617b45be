#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "pbmt/campaign.hpp"
#include "pbmt/errors.hpp"

using namespace pbmt;
namespace fs = std::filesystem;

namespace {

CampaignConfig small_config(int parallelism) {
  CampaignConfig cfg;
  cfg.model_path = std::string(PBMT_MODELS_DIR) + "/mini-atc.dfm";
  cfg.property_path = std::string(PBMT_MODELS_DIR) + "/mini-atc.stl";
  cfg.sim = {0.04, 6.0};
  cfg.operators = {MutationOp::Noise, MutationOp::Bias,   MutationOp::Negate,
                   MutationOp::Absolute, MutationOp::StuckAt, MutationOp::Asr,
                   MutationOp::S2p};
  cfg.master_seed = 11;
  cfg.art = {true, 8, 6, 2, 21};
  cfg.ft = {true, 6, 10, 2, 22};
  cfg.sbtg = {true, 2, 6, 15, 2, 23, std::nullopt, std::nullopt};
  cfg.oracle = {true, 2, 3};
  cfg.parallelism = parallelism;
  cfg.output_dir = (fs::temp_directory_path() / "pbmt_campaign_test").string();
  return cfg;
}

}  // namespace

TEST_CASE("small campaign: hierarchy, self-consistency, determinism across parallelism") {
  const CampaignResult r1 = run_campaign(small_config(1));
  const CampaignResult r4 = run_campaign(small_config(4));
  const CampaignResult again = run_campaign(small_config(1));

  // identical config and seeds: byte-identical deterministic report
  CHECK(r1.report_json == again.report_json);
  CHECK(r1.report_json == r4.report_json);

  const KillMatrix& km = r1.matrix;
  REQUIRE(km.tests() > 0);
  REQUIRE(km.cols() > 0);

  // per-cell kill hierarchy
  for (int t = 0; t < km.tests(); ++t)
    for (int m = 0; m < km.cols(); ++m) {
      const KillVerdict& v = km.cell(t, m);
      if (v.phi) CHECK(v.strong);
      if (v.strong) CHECK(v.weak);
    }

  // KD_phi subset of KD as mutant sets
  for (int m = 0; m < km.cols(); ++m) {
    bool phi_killed = false, killed = false;
    for (int t = 0; t < km.tests(); ++t) {
      phi_killed = phi_killed || km.cell(t, m).phi;
      killed = killed || km.cell(t, m).strong;
    }
    if (phi_killed) CHECK(killed);
  }

  // report count ordering
  for (const auto& [name, score] : r1.scores) {
    CHECK(score.phi_killed <= score.killed);
    CHECK(score.killed <= score.killable);
    CHECK(score.killable <= score.valid);
    CHECK(score.valid + score.invalid == score.mutants_total);
  }

  // every suite test respects the input box
  for (const auto& e : r1.suite) {
    CHECK((e.test.controls.array() >= 0).all());
    CHECK((e.test.controls.array() <= 100).all());
  }

  // labels partition the columns
  int equivalents = 0;
  for (const auto& col : km.mutants) {
    if (col.label == MutantLabel::Equivalent) {
      ++equivalents;
      CHECK((col.provenance == LabelProvenance::Oracle ||
             col.provenance == LabelProvenance::SbtgExhausted));
    }
  }
  CHECK(equivalents > 0);  // absolute mutants on the nonnegative model
}

TEST_CASE("campaign outputs round-trip through the filesystem") {
  const CampaignConfig cfg = small_config(2);
  const CampaignResult r = run_campaign(cfg);
  write_campaign_outputs(r, cfg);

  CHECK(fs::exists(fs::path(cfg.output_dir) / "report.json"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "kill_matrix.csv"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "timing.json"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "model.dfm"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "suites/art.json"));

  // the written matrix reduces exactly like the in-memory one
  std::ifstream in(fs::path(cfg.output_dir) / "kill_matrix.csv");
  std::stringstream buf;
  buf << in.rdbuf();
  const KillMatrix reread = kill_matrix_from_csv(buf.str());
  CHECK(greedy_reduce(reread) == r.reduced.at("all"));
}

TEST_CASE("plot data marks violations only where the property predicates fail") {
  const CampaignConfig cfg = small_config(2);
  const CampaignResult r = run_campaign(cfg);
  write_campaign_outputs(r, cfg);

  // pick a phi-killing cell from the matrix
  std::string killing_test, killed_mutant;
  std::string clean_test, clean_mutant;
  for (int t = 0; t < r.matrix.tests() && killing_test.empty(); ++t)
    for (int m = 0; m < r.matrix.cols(); ++m)
      if (r.matrix.cell(t, m).phi) {
        killing_test = r.matrix.test_ids[static_cast<std::size_t>(t)];
        killed_mutant = r.matrix.mutants[static_cast<std::size_t>(m)].id;
        break;
      }
  REQUIRE(!killing_test.empty());

  const std::string csv = emit_plot_data(cfg.output_dir, killed_mutant, killing_test);
  int mutant_violations = 0, original_rows = 0;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "time,signal,variant,value,violated");
  while (std::getline(lines, line)) {
    if (line.find(",mutant,") != std::string::npos && line.back() == '1') ++mutant_violations;
    if (line.find(",original,") != std::string::npos) ++original_rows;
  }
  CHECK(mutant_violations > 0);
  CHECK(original_rows > 0);

  // an equivalent mutant's plot shows identical value columns
  std::string equivalent_id;
  for (const auto& col : r.matrix.mutants)
    if (col.label == MutantLabel::Equivalent) equivalent_id = col.id;
  REQUIRE(!equivalent_id.empty());
  const std::string eq_csv =
      emit_plot_data(cfg.output_dir, equivalent_id, r.matrix.test_ids.front());
  std::map<std::string, std::vector<std::string>> by_variant;
  std::istringstream eq_lines(eq_csv);
  std::getline(eq_lines, line);
  while (std::getline(eq_lines, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const auto third = line.find(',', second + 1);
    const auto fourth = line.find(',', third + 1);
    by_variant[line.substr(second + 1, third - second - 1)].push_back(
        line.substr(0, first) + "|" + line.substr(first + 1, second - first - 1) + "|" +
        line.substr(third + 1, fourth - third - 1));
  }
  CHECK(by_variant["original"] == by_variant["mutant"]);

  CHECK_THROWS_AS(emit_plot_data(cfg.output_dir, "no_such_mutant", killing_test), UnknownCell);
  CHECK_THROWS_AS(emit_plot_data(cfg.output_dir, killed_mutant, "no_such_test"), UnknownCell);
}

TEST_CASE("config loader resolves paths and rejects missing pieces") {
  const fs::path dir = fs::temp_directory_path() / "pbmt_config_test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"schema":"pbmt-campaign/1","model":"nope.dfm","property":"nope.stl",)"
        << R"("sim":{"sample_time":0.1,"horizon":1.0},"strategies":{}})";
  }
  CHECK_THROWS_AS(load_campaign_config((dir / "bad.json").string()), ConfigError);

  {
    std::ofstream out(dir / "schema.json");
    out << R"({"schema":"something-else"})";
  }
  CHECK_THROWS_AS(load_campaign_config((dir / "schema.json").string()), ConfigError);

  // a good config relative to its own directory
  fs::copy_file(std::string(PBMT_MODELS_DIR) + "/mini-atc.dfm", dir / "m.dfm",
                fs::copy_options::overwrite_existing);
  fs::copy_file(std::string(PBMT_MODELS_DIR) + "/mini-atc.stl", dir / "p.stl",
                fs::copy_options::overwrite_existing);
  {
    std::ofstream out(dir / "good.json");
    out << R"({"schema":"pbmt-campaign/1","model":"m.dfm","property":"p.stl",)"
        << R"("sim":{"sample_time":0.04,"horizon":6.0},"master_seed":5,)"
        << R"("operators":["negate"],)"
        << R"("strategies":{"art":{"n":3,"q_t":2,"seed":1}},"output_dir":"out"})";
  }
  const CampaignConfig cfg = load_campaign_config((dir / "good.json").string());
  CHECK(cfg.art.enabled);
  CHECK(!cfg.ft.enabled);
  CHECK(cfg.art.n == 3);
  CHECK(cfg.operators.size() == 1);
  CHECK(fs::path(cfg.model_path).is_absolute() == fs::path((dir / "m.dfm").string()).is_absolute());
  const CampaignResult r = run_campaign(cfg);
  CHECK(r.scores.count("art") == 1);
  CHECK(r.scores.count("ft") == 0);
}
