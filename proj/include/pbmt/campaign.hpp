#pragma once

#include <map>
#include <optional>
#include <string>

#include "pbmt/scoring.hpp"
#include "pbmt/testgen.hpp"

namespace pbmt {

struct ArtConfig {
  bool enabled = false;
  int n = 30;
  int candidates_per_pick = 10;
  int q_t = 10;
  std::uint64_t seed = 1;
};

struct FtConfig {
  bool enabled = false;
  int population = 10;
  int max_iterations = 50;
  int q_t = 10;
  std::uint64_t seed = 2;
};

struct SbtgConfig {
  bool enabled = false;
  int runs = 30;  // independent searches before a mutant counts as exhausted
  int population = 12;
  int max_iterations = 200;
  int q_t = 10;
  std::uint64_t seed = 3;
  std::optional<double> w1, w2;  // penalty overrides
};

struct OracleConfig {
  bool enabled = false;
  int q_t = 1;
  int levels = 3;
};

struct CampaignConfig {
  std::string model_path;
  std::string property_path;
  SimConfig sim;
  std::vector<MutationOp> operators;  // empty = full catalog
  MutationDefaults mutation_defaults;
  std::uint64_t master_seed = 1;
  double tolerance = 0.0;

  ArtConfig art;
  FtConfig ft;
  SbtgConfig sbtg;
  OracleConfig oracle;

  std::string output_dir;
  int parallelism = 0;  // 0: PBMT_PARALLELISM env var, then hardware
};

// Parses the JSON config; file paths resolve relative to the config file.
// Throws ConfigError on malformed or missing pieces.
CampaignConfig load_campaign_config(const std::string& path);

struct SbtgOutcome {
  int runs_attempted = 0;
  bool found = false;
  SearchLog log;  // the successful run's log, or the last failed one
};

struct CampaignResult {
  Model model;  // flattened
  StlPtr property;
  GeneratedMutants mutants;
  std::vector<SuiteEntry> suite;  // kill matrix row order
  KillMatrix matrix;              // labeled columns

  std::map<std::string, ScoreReport> scores;  // art/ft/sbtg/all (enabled ones)
  SubsumptionReport subsumption;
  std::map<std::string, std::vector<std::string>> reduced;  // per strategy + "all"
  std::map<std::string, SbtgOutcome> sbtg_outcomes;         // by mutant id
  std::map<std::string, BruteForceResult> oracle_verdicts;  // by mutant id

  std::string report_json;  // deterministic: identical config+seeds => identical bytes

  double generation_seconds = 0.0;
  double execution_seconds = 0.0;
  double total_seconds = 0.0;
};

// End-to-end campaign: parse, mutate, generate suites, execute the full
// (test x variant) cross product, classify, label, score. Deterministic for
// fixed config and seeds, at any parallelism degree.
CampaignResult run_campaign(const CampaignConfig& cfg);

// Writes report.json, timing.json, manifest.json, kill_matrix.csv, the
// suites, and self-contained copies of the model and property.
void write_campaign_outputs(const CampaignResult& result, const CampaignConfig& cfg);

// Long-format CSV (time,signal,variant,value,violated) of original vs mutant
// output signals for one executed cell, regenerated from a report directory.
// Throws UnknownCell for ids the campaign did not execute.
std::string emit_plot_data(const std::string& report_dir, const std::string& mutant_id,
                           const std::string& test_id);

int effective_parallelism(int configured);

}  // namespace pbmt
