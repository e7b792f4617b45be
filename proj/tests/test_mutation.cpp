#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "pbmt/dsl.hpp"
#include "pbmt/errors.hpp"
#include "pbmt/mutation.hpp"
#include "testutil.hpp"

using namespace pbmt;

namespace {

Model atc_flat() {
  return flatten(parse_model_file(std::string(PBMT_MODELS_DIR) + "/mini-atc.dfm"));
}

Model actuator_flat() {
  return flatten(parse_model_file(std::string(PBMT_MODELS_DIR) + "/mini-actuator.dfm"));
}

// u -> y passthrough with one mutable line.
Model passthrough() {
  return parse_model("model pt\ninput u range=[-10,10]\nblock g Gain k=1\noutput y\n"
                     "line u.out1 -> g.in1\nline g.out1 -> y.in1\n");
}

int diff_lines(const std::string& a, const std::string& b) {
  std::istringstream sa(a), sb(b);
  std::string la, lb;
  int diffs = 0;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(sa, la));
    const bool gb = static_cast<bool>(std::getline(sb, lb));
    if (!ga && !gb) return diffs;
    if (ga != gb) return 1000;  // length change counts as many
    if (la != lb) ++diffs;
  }
}

const SimConfig kCfg{0.04, 6.0};

}  // namespace

TEST_CASE("line operators enumerate one site per line") {
  const Model m = passthrough();
  const auto sites = enumerate_sites(m, {MutationOp::Negate});
  REQUIRE(sites.size() == 2);
  CHECK(sites[0].second == "u.out1->g.in1");
  CHECK(sites[1].second == "g.out1->y.in1");
}

TEST_CASE("no relational blocks means zero ror sites") {
  const auto sites = enumerate_sites(atc_flat(), {MutationOp::Ror});
  CHECK(sites.empty());
}

TEST_CASE("full catalog site count on mini-atc matches the hand count") {
  const Model m = atc_flat();
  // 16 lines x 7 line operators, plus by hand: S2P on the two Sum blocks,
  // P2S on the one Product, ASR on the two Sums, and both LUT operators on
  // the one table.
  CHECK(m.lines.size() == 16);
  const auto sites = enumerate_sites(m, all_mutation_ops());
  CHECK(sites.size() == 16 * 7 + 2 + 1 + 2 + 2);
}

TEST_CASE("negate mutates the carried signal pointwise") {
  const Model m = passthrough();
  MutantDescriptor d;
  d.id = "neg";
  d.op = MutationOp::Negate;
  d.site = "u.out1->g.in1";
  const MutantModel mut = apply_mutation(m, d);
  CHECK(mut.mutated_signal == "u.out1->g.in1");
  const SimConfig cfg{1.0, 2.0};
  const Trace tr = simulate(mut.model, testutil::single_input({1, -2, 3}), cfg);
  const Eigen::VectorXd y = tr.signal("y");
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == -3.0);
  // the post-fault line value is what the trace records
  CHECK(tr.signal("u.out1->g.in1")[0] == -1.0);
  // but the input signal itself is untouched
  CHECK(tr.signal("u")[0] == 1.0);
}

TEST_CASE("asr flips exactly one sign") {
  const Model m = parse_model("model s\ninput a range=[0,1]\ninput b range=[0,1]\n"
                              "block s Sum signs=+-\noutput y\n"
                              "line a.out1 -> s.in1\nline b.out1 -> s.in2\nline s.out1 -> y.in1\n");
  MutantDescriptor d;
  d.op = MutationOp::Asr;
  d.site = "s";
  d.index = 0;
  const MutantModel mut = apply_mutation(m, d);
  CHECK(std::get<SumParams>(mut.model.find_block("s")->params).signs == "--");
  d.index = 1;
  CHECK(std::get<SumParams>(apply_mutation(m, d).model.find_block("s")->params).signs == "++");
}

TEST_CASE("s2p and p2s swap block kinds preserving arity") {
  const Model m = atc_flat();
  MutantDescriptor d;
  d.op = MutationOp::S2p;
  d.site = "v_next";
  const MutantModel s2p = apply_mutation(m, d);
  CHECK(s2p.model.find_block("v_next")->kind() == BlockKind::Product);
  CHECK(std::get<ProductParams>(s2p.model.find_block("v_next")->params).arity == 2);

  d.op = MutationOp::P2s;
  d.site = "vd";
  const MutantModel p2s = apply_mutation(m, d);
  CHECK(p2s.model.find_block("vd")->kind() == BlockKind::Sum);
  CHECK(std::get<SumParams>(p2s.model.find_block("vd")->params).signs == "++");
}

TEST_CASE("absolute on a provably nonnegative line is trace-equivalent") {
  const Model m = atc_flat();
  const Simulator orig(m, kCfg);
  MutantDescriptor d;
  d.op = MutationOp::Absolute;
  d.site = "v_state.out1->vd.in2";
  const Simulator mut(apply_mutation(m, d).model, kCfg);
  for (double thr : {0.0, 35.0, 100.0}) {
    for (double brk : {0.0, 80.0}) {
      const TestCase t = testutil::constant_inputs({thr, brk});
      const Trace a = orig.run(t);
      const Trace b = mut.run(t);
      CHECK((a.values.array() == b.values.array()).all());
    }
  }
}

TEST_CASE("negation composed with itself restores the original traces") {
  Model m = passthrough();
  // two single negations chained across consecutive lines
  m.lines[0].fault = LineFault{.kind = LineFaultKind::Negate};
  m.lines[1].fault = LineFault{.kind = LineFaultKind::Negate};
  const SimConfig cfg{1.0, 2.0};
  const TestCase t = testutil::single_input({1.5, -2.25, 3.0});
  const Eigen::VectorXd doubled = simulate(m, t, cfg).signal("y");
  const Eigen::VectorXd plain = simulate(passthrough(), t, cfg).signal("y");
  CHECK((doubled.array() == plain.array()).all());
}

TEST_CASE("stochastic faults are bit-identical across re-simulation, distinct across seeds") {
  const Model m = passthrough();
  const SimConfig cfg{0.1, 10.0};
  const TestCase t = testutil::single_input({5, -5, 2, 8});
  for (MutationOp op : {MutationOp::Noise, MutationOp::PackageDrop}) {
    MutantDescriptor d;
    d.op = op;
    d.site = "g.out1->y.in1";
    d.number = op == MutationOp::Noise ? 0.5 : 0.4;
    d.seed = 42;
    const MutantModel m1 = apply_mutation(m, d);
    const Trace a = simulate(m1.model, t, cfg);
    const Trace b = simulate(m1.model, t, cfg);
    CHECK((a.values.array() == b.values.array()).all());

    d.seed = 43;
    const Trace c = simulate(apply_mutation(m, d).model, t, cfg);
    CHECK(!(a.values.array() == c.values.array()).all());
  }
}

TEST_CASE("time delay shifts and holds the first sample") {
  const Model m = passthrough();
  MutantDescriptor d;
  d.op = MutationOp::TimeDelay;
  d.site = "g.out1->y.in1";
  d.index = 2;
  const SimConfig cfg{1.0, 5.0};
  const TestCase ramp = testutil::single_input({1, 2, 3, 4, 5, 6});
  const Eigen::VectorXd y = simulate(apply_mutation(m, d).model, ramp, cfg).signal("y");
  CHECK(y[0] == 1.0);  // s_0 held
  CHECK(y[1] == 1.0);
  CHECK(y[2] == 1.0);  // s_{2-2}
  CHECK(y[3] == 2.0);
  CHECK(y[4] == 3.0);
  CHECK(y[5] == 4.0);
}

TEST_CASE("package drop holds the previous delivered value") {
  const Model m = passthrough();
  MutantDescriptor d;
  d.op = MutationOp::PackageDrop;
  d.site = "g.out1->y.in1";
  d.number = 0.5;
  d.seed = 7;
  const SimConfig cfg{0.1, 9.9};  // 100 samples
  TestCase t;
  t.controls.resize(1, 100);
  for (int c = 0; c < 100; ++c) t.controls(0, c) = c % 11 - 5;
  const Trace tr = simulate(apply_mutation(m, d).model, t, cfg);
  const Eigen::VectorXd u = tr.signal("u");
  const Eigen::VectorXd y = tr.signal("y");
  int drops = 0;
  CHECK(y[0] == u[0]);  // nothing delivered yet: first sample passes through
  for (int j = 1; j < tr.rows(); ++j) {
    const bool passed = y[j] == u[j];
    const bool held = y[j] == y[j - 1];
    CHECK((passed || held));
    if (!passed) ++drops;
  }
  CHECK(drops > 20);  // p = 0.5 over 99 samples
}

TEST_CASE("generated mutants differ from the base in exactly one declaration") {
  const Model m = atc_flat();
  const std::string base = serialize_model(m);
  const auto generated = generate_mutants(m, all_mutation_ops(), 2025, kCfg);
  CHECK(!generated.mutants.empty());
  for (const auto& mut : generated.mutants) {
    CHECK(diff_lines(base, serialize_model(mut.model)) == 1);
    CHECK(!mut.mutated_signal.empty());
  }
}

TEST_CASE("generation is deterministic in the master seed") {
  const Model m = atc_flat();
  const auto a = generate_mutants(m, all_mutation_ops(), 99, kCfg);
  const auto b = generate_mutants(m, all_mutation_ops(), 99, kCfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].descriptor == b.records[i].descriptor);
    CHECK(a.records[i].valid == b.records[i].valid);
  }
  const auto c = generate_mutants(m, all_mutation_ops(), 100, kCfg);
  bool any_param_differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    any_param_differs = any_param_differs || !(a.records[i].descriptor == c.records[i].descriptor);
  CHECK(any_param_differs);
}

TEST_CASE("apply_mutation is a pure function of model and descriptor") {
  const Model m = atc_flat();
  const auto generated = generate_mutants(m, all_mutation_ops(), 7, kCfg);
  for (std::size_t i = 0; i < std::min<std::size_t>(generated.mutants.size(), 12); ++i) {
    const MutantDescriptor& d = generated.mutants[i].descriptor;
    CHECK(apply_mutation(m, d).model == apply_mutation(m, d).model);
    CHECK(apply_mutation(m, d).model == generated.mutants[i].model);
  }
}

TEST_CASE("lor on a NOT block yields an invalid recorded mutant") {
  const Model m = actuator_flat();
  const auto generated = generate_mutants(m, {MutationOp::Lor}, 5, SimConfig{0.04, 6.0});
  const MutantRecord* not_site = nullptr;
  for (const auto& r : generated.records)
    if (r.descriptor.site == "idle_flag") not_site = &r;
  REQUIRE(not_site != nullptr);
  CHECK(!not_site->valid);
  REQUIRE(!not_site->diagnostics.empty());
  CHECK(not_site->diagnostics[0].code == "BadParam");
  // invalid records never appear among the usable mutants
  for (const auto& mut : generated.mutants) CHECK(mut.descriptor.site != "idle_flag");
}

TEST_CASE("incompatible sites are rejected") {
  const Model m = atc_flat();
  MutantDescriptor d;
  d.op = MutationOp::Ror;
  d.site = "vd";  // a Product block
  CHECK_THROWS_AS(apply_mutation(m, d), IncompatibleSite);
  d.op = MutationOp::Negate;
  d.site = "no.such->line.here";
  CHECK_THROWS_AS(apply_mutation(m, d), IncompatibleSite);
}

TEST_CASE("manifest round trip regenerates identical mutants") {
  const Model m = atc_flat();
  const auto generated = generate_mutants(m, all_mutation_ops(), 321, kCfg);
  const std::string path = (std::filesystem::temp_directory_path() / "pbmt_manifest.json").string();
  write_manifest(generated, m.name, 321, path);
  const auto records = read_manifest(path);
  REQUIRE(records.size() == generated.records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].descriptor == generated.records[i].descriptor);
    CHECK(records[i].valid == generated.records[i].valid);
    if (records[i].valid) {
      const MutantModel again = apply_mutation(m, records[i].descriptor);
      const MutantModel* original = nullptr;
      for (const auto& mut : generated.mutants)
        if (mut.descriptor.id == records[i].descriptor.id) original = &mut;
      REQUIRE(original != nullptr);
      CHECK(again.model == original->model);
      CHECK(again.mutated_signal == original->mutated_signal);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("stuck-at on the limiter line pins the speed output") {
  const Model m = atc_flat();
  MutantDescriptor d;
  d.op = MutationOp::StuckAt;
  d.site = "limiter.out1->v.in1";
  d.number = 130.0;
  const MutantModel mut = apply_mutation(m, d);
  const Trace tr = simulate(mut.model, testutil::constant_inputs({20, 50}), kCfg);
  const Eigen::VectorXd v = tr.signal("v");
  CHECK((v.array() == 130.0).all());
}
