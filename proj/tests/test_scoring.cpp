#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "pbmt/errors.hpp"
#include "pbmt/rng.hpp"
#include "pbmt/scoring.hpp"

using namespace pbmt;

namespace {

// Synthetic matrix: `total` mutants of which `equivalent` are labeled
// equivalent; the first `killed` killable mutants are strongly killed and
// the first `phi_killed` of those also phi-killed, all by one test row.
KillMatrix synthetic(int total, int equivalent, int killed, int phi_killed) {
  KillMatrix km;
  km.test_ids = {"t0"};
  for (int m = 0; m < total; ++m) {
    MutantColumn col;
    col.id = "m" + std::to_string(m);
    col.label = m < equivalent ? MutantLabel::Equivalent : MutantLabel::NtdPhi;
    km.mutants.push_back(col);
  }
  km.resize_cells();
  int strong_left = killed, phi_left = phi_killed;
  for (int m = equivalent; m < total; ++m) {
    KillVerdict& v = km.cell(0, m);
    if (strong_left > 0) {
      v.weak = v.strong = true;
      --strong_left;
      if (phi_left > 0) {
        v.phi = true;
        v.rho_orig = 1.0;
        v.rho_mut = -1.0;
        --phi_left;
      }
    }
  }
  return km;
}

Trace trace_of(std::initializer_list<std::pair<std::string, std::vector<double>>> signals) {
  Trace t;
  const int k = static_cast<int>(signals.begin()->second.size());
  t.times.resize(k);
  for (int j = 0; j < k; ++j) t.times[j] = j;
  t.values.resize(k, static_cast<long>(signals.size()));
  int c = 0;
  for (const auto& [name, vals] : signals) {
    t.names.push_back(name);
    t.column[name] = c;
    for (int j = 0; j < k; ++j) t.values(j, c) = vals[static_cast<std::size_t>(j)];
    ++c;
  }
  return t;
}

}  // namespace

TEST_CASE("mutation scores reproduce the published ATCS/AECS table to two decimals") {
  struct Row {
    int mutants, equivalent, killed, phi_killed;
    const char* ms;
    const char* ms_phi;
  };
  // ATCS: 60 mutants, 13 equivalent -> 47 killable; AECS: 100 / 17 -> 83.
  const Row rows[] = {
      {60, 13, 47, 25, "100.00", "53.19"},  // ATCS with the diversity suite
      {60, 13, 46, 27, "97.87", "57.44"},   // ATCS with the falsification suite
      {100, 17, 74, 39, "89.15", "46.98"},  // AECS, diversity
      {100, 17, 70, 35, "84.33", "42.16"},  // AECS, falsification
  };
  for (const Row& row : rows) {
    const KillMatrix km = synthetic(row.mutants, row.equivalent, row.killed, row.phi_killed);
    const ScoreReport r = mutation_score(km);
    CHECK(r.mutants_total == row.mutants);
    CHECK(r.killable == row.mutants - row.equivalent);
    CHECK(r.phi_killable == row.mutants - row.equivalent);
    CHECK(r.killed == row.killed);
    CHECK(r.phi_killed == row.phi_killed);
    CHECK(format_percent(r.ms()) == row.ms);
    CHECK(format_percent(r.ms_phi()) == row.ms_phi);
  }
}

TEST_CASE("percent formatting truncates, never rounds up") {
  CHECK(format_percent(74.0 / 83.0) == "89.15");   // 89.1566... would round to 89.16
  CHECK(format_percent(70.0 / 83.0) == "84.33");   // 84.3373...
  CHECK(format_percent(27.0 / 47.0) == "57.44");   // 57.4468...
  CHECK(format_percent(35.0 / 83.0) == "42.16");   // 42.1686...
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.25) == "25.00");  // exact values keep both decimals
  CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("zero killed yields zero score; zero denominators throw") {
  const ScoreReport r = mutation_score(synthetic(5, 0, 0, 0));
  CHECK(r.ms() == 0.0);
  CHECK(format_percent(r.ms()) == "0.00");

  CHECK_THROWS_AS(mutation_score(synthetic(3, 3, 0, 0)), ZeroDenominator);

  KillMatrix all_td = synthetic(3, 1, 0, 0);
  for (auto& m : all_td.mutants)
    if (m.label == MutantLabel::NtdPhi) m.label = MutantLabel::PhiTriviallyDifferent;
  CHECK_THROWS_AS(mutation_score(all_td), ZeroDenominator);
}

TEST_CASE("classify: identical traces, masked infection, masked property") {
  const SimConfig cfg{1.0, 3.0};
  const StlPredicate pred{.signal = "y", .signal2 = std::nullopt, .op = RelOp::Le, .threshold = 10};
  const StlPtr phi = stl_always({}, stl_predicate(pred));
  const std::vector<std::string> outputs = {"y"};

  const Trace orig = trace_of({{"s", {1, 2, 3, 4}}, {"y", {1, 1, 1, 1}}});

  // identical -> nothing killed
  const KillVerdict none = classify(orig, orig, "s", outputs, *phi, cfg, 0.0);
  CHECK(!none.weak);
  CHECK(!none.strong);
  CHECK(!none.phi);

  // internal signal differs, outputs identical: infection without propagation
  const Trace masked = trace_of({{"s", {1, 9, 3, 4}}, {"y", {1, 1, 1, 1}}});
  const KillVerdict weak_only = classify(orig, masked, "s", outputs, *phi, cfg, 0.0);
  CHECK(weak_only.weak);
  CHECK(!weak_only.strong);
  CHECK(!weak_only.phi);

  // outputs differ but the property still holds on both: strong, not phi
  const Trace shifted = trace_of({{"s", {1, 9, 3, 4}}, {"y", {1, 5, 1, 1}}});
  const KillVerdict strong_only = classify(orig, shifted, "s", outputs, *phi, cfg, 0.0);
  CHECK(strong_only.weak);
  CHECK(strong_only.strong);
  CHECK(!strong_only.phi);
  CHECK(strong_only.rho_orig > 0);
  CHECK(strong_only.rho_mut > 0);

  // outputs cross the threshold: the full phi => strong => weak chain
  const Trace violating = trace_of({{"s", {1, 9, 3, 4}}, {"y", {1, 11, 1, 1}}});
  const KillVerdict phi_kill = classify(orig, violating, "s", outputs, *phi, cfg, 0.0);
  CHECK(phi_kill.weak);
  CHECK(phi_kill.strong);
  CHECK(phi_kill.phi);
  CHECK(phi_kill.rho_mut < 0);
}

TEST_CASE("classify honors the tolerance") {
  const SimConfig cfg{1.0, 1.0};
  const StlPredicate pred{.signal = "y", .signal2 = std::nullopt, .op = RelOp::Le, .threshold = 10};
  const StlPtr phi = stl_always({}, stl_predicate(pred));
  const Trace a = trace_of({{"s", {1.0, 1.0}}, {"y", {1.0, 1.0}}});
  const Trace b = trace_of({{"s", {1.05, 1.0}}, {"y", {1.05, 1.0}}});
  CHECK(classify(a, b, "s", {"y"}, *phi, cfg, 0.0).weak);
  CHECK(!classify(a, b, "s", {"y"}, *phi, cfg, 0.1).weak);
  CHECK(!classify(a, b, "s", {"y"}, *phi, cfg, 0.1).strong);
}

TEST_CASE("greedy reduction covers with the fewest obvious picks") {
  // t0 kills m0,m1,m2; t1 kills m3,m4; t2 kills m5; t3 kills m0 only
  KillMatrix km;
  km.test_ids = {"t0", "t1", "t2", "t3"};
  for (int m = 0; m < 6; ++m) {
    MutantColumn col;
    col.id = "m" + std::to_string(m);
    km.mutants.push_back(col);
  }
  km.resize_cells();
  auto phi_at = [&](int t, int m) { km.cell(t, m).phi = km.cell(t, m).strong = km.cell(t, m).weak = true; };
  phi_at(0, 0);
  phi_at(0, 1);
  phi_at(0, 2);
  phi_at(1, 3);
  phi_at(1, 4);
  phi_at(2, 5);
  phi_at(3, 0);
  const auto picked = greedy_reduce(km);
  REQUIRE(picked.size() == 3);
  CHECK(picked[0] == "t0");
  CHECK(picked[1] == "t1");
  CHECK(picked[2] == "t2");
}

TEST_CASE("a single test that phi-kills everything reduces the suite to itself") {
  KillMatrix km;
  km.test_ids = {"a", "b", "c"};
  for (int m = 0; m < 4; ++m) {
    MutantColumn col;
    col.id = "m" + std::to_string(m);
    km.mutants.push_back(col);
  }
  km.resize_cells();
  for (int m = 0; m < 4; ++m) km.cell(1, m).phi = true;
  km.cell(0, 2).phi = true;
  const auto picked = greedy_reduce(km);
  REQUIRE(picked.size() == 1);
  CHECK(picked[0] == "b");
}

TEST_CASE("empty matrix reduces to nothing") {
  KillMatrix km;
  CHECK(greedy_reduce(km).empty());
  km.test_ids = {"t"};
  MutantColumn col;
  col.id = "m";
  km.mutants.push_back(col);
  km.resize_cells();
  CHECK(greedy_reduce(km).empty());
}

namespace {

KillMatrix random_matrix(rng::Stream& stream, int tests, int mutants) {
  KillMatrix km;
  for (int t = 0; t < tests; ++t) km.test_ids.push_back("t" + std::to_string(t));
  for (int m = 0; m < mutants; ++m) {
    MutantColumn col;
    col.id = "m" + std::to_string(m);
    km.mutants.push_back(col);
  }
  km.resize_cells();
  for (int t = 0; t < tests; ++t)
    for (int m = 0; m < mutants; ++m) {
      KillVerdict& v = km.cell(t, m);
      v.phi = stream.below(3) == 0;
      v.strong = v.phi || stream.below(3) == 0;
      v.weak = v.strong || stream.below(2) == 0;
      v.output_digest = v.strong ? stream.next_u64() % 4 : 0;
    }
  return km;
}

std::set<int> phi_killed_set(const KillMatrix& km, const std::vector<std::string>& rows) {
  std::set<int> out;
  for (int m = 0; m < km.cols(); ++m)
    for (const auto& id : rows) {
      const auto it = std::find(km.test_ids.begin(), km.test_ids.end(), id);
      if (it == km.test_ids.end()) continue;
      if (km.cell(static_cast<int>(it - km.test_ids.begin()), m).phi) out.insert(m);
    }
  return out;
}

std::set<int> phi_killed_all(const KillMatrix& km) {
  return phi_killed_set(km, km.test_ids);
}

}  // namespace

TEST_CASE("reduction soundness on random matrices") {
  rng::Stream stream(88);
  for (int trial = 0; trial < 60; ++trial) {
    const KillMatrix km = random_matrix(stream, 2 + stream.below(8), 2 + stream.below(12));
    const auto picked = greedy_reduce(km);
    CHECK(phi_killed_set(km, picked) == phi_killed_all(km));
    std::set<std::string> unique(picked.begin(), picked.end());
    CHECK(unique.size() == picked.size());
  }
}

TEST_CASE("subsumption definition, duplicates, and structural properties") {
  // m0 killed by {t0}; m1 killed by {t0,t1}; m2 never killed
  KillMatrix km;
  km.test_ids = {"t0", "t1"};
  for (int m = 0; m < 3; ++m) {
    MutantColumn col;
    col.id = "m" + std::to_string(m);
    km.mutants.push_back(col);
  }
  km.resize_cells();
  km.cell(0, 0).phi = true;
  km.cell(0, 1).phi = true;
  km.cell(1, 1).phi = true;
  const SubsumptionReport r = dynamic_subsumption(km);
  REQUIRE(r.subsumes.size() == 1);
  CHECK(r.subsumes[0] == std::make_pair(0, 1));  // m0 subsumes m1
  CHECK(r.duplicate_groups.empty());

  // identical kill vectors and identical digests form a duplicate group
  KillMatrix dup;
  dup.test_ids = {"t0"};
  for (int m = 0; m < 2; ++m) {
    MutantColumn col;
    col.id = "d" + std::to_string(m);
    dup.mutants.push_back(col);
  }
  dup.resize_cells();
  for (int m = 0; m < 2; ++m) {
    dup.cell(0, m).phi = true;
    dup.cell(0, m).output_digest = 77;
  }
  const SubsumptionReport r2 = dynamic_subsumption(dup);
  REQUIRE(r2.duplicate_groups.size() == 1);
  CHECK(r2.duplicate_groups[0] == std::vector<int>{0, 1});
}

TEST_CASE("subsumption is transitive and never reflexive on random matrices") {
  rng::Stream stream(555);
  for (int trial = 0; trial < 40; ++trial) {
    const KillMatrix km = random_matrix(stream, 3 + stream.below(5), 3 + stream.below(8));
    const SubsumptionReport r = dynamic_subsumption(km);
    std::set<std::pair<int, int>> rel(r.subsumes.begin(), r.subsumes.end());
    for (const auto& [i, j] : rel) CHECK(i != j);
    for (const auto& [i, j] : rel)
      for (const auto& [j2, k] : rel)
        if (j == j2 && i != k) CHECK(rel.count({i, k}) == 1);
  }
}

TEST_CASE("kill matrix csv round trip preserves flags, labels, and rho") {
  rng::Stream stream(9);
  KillMatrix km = random_matrix(stream, 4, 5);
  km.mutants[1].label = MutantLabel::Equivalent;
  km.mutants[2].label = MutantLabel::Invalid;
  km.mutants[3].label = MutantLabel::PhiTriviallyDifferent;
  km.cell(0, 0).rho_orig = 1.25;
  km.cell(0, 0).rho_mut = -0.5;
  km.cell(2, 4).sim_failed = true;

  const KillMatrix again = kill_matrix_from_csv(kill_matrix_to_csv(km));
  REQUIRE(again.test_ids == km.test_ids);
  REQUIRE(again.cols() == km.cols());
  for (int m = 0; m < km.cols(); ++m) {
    CHECK(again.mutants[m].id == km.mutants[m].id);
    CHECK(again.mutants[m].label == km.mutants[m].label);
  }
  for (int t = 0; t < km.tests(); ++t)
    for (int m = 0; m < km.cols(); ++m) {
      const KillVerdict& a = km.cell(t, m);
      const KillVerdict& b = again.cell(t, m);
      CHECK(a.weak == b.weak);
      CHECK(a.strong == b.strong);
      CHECK(a.phi == b.phi);
      CHECK(a.sim_failed == b.sim_failed);
      if (!a.sim_failed) {
        CHECK(a.rho_orig == b.rho_orig);
        CHECK(a.rho_mut == b.rho_mut);
      }
    }
}

TEST_CASE("filtering rows keeps columns and verdicts aligned") {
  rng::Stream stream(3);
  const KillMatrix km = random_matrix(stream, 5, 4);
  const KillMatrix view = filter_tests(km, {"t3", "t1"});
  REQUIRE(view.tests() == 2);
  CHECK(view.test_ids[0] == "t3");
  for (int m = 0; m < km.cols(); ++m) {
    CHECK(view.cell(0, m).phi == km.cell(3, m).phi);
    CHECK(view.cell(1, m).strong == km.cell(1, m).strong);
  }
}
