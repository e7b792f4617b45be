#include "pbmt/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pbmt/errors.hpp"

namespace pbmt {

const char* to_string(MutantLabel label) {
  switch (label) {
    case MutantLabel::NtdPhi: return "ntd_phi";
    case MutantLabel::PhiTriviallyDifferent: return "phi_trivially_different";
    case MutantLabel::Equivalent: return "equivalent";
    case MutantLabel::Invalid: return "invalid";
  }
  return "?";
}

const char* to_string(LabelProvenance prov) {
  switch (prov) {
    case LabelProvenance::Kill: return "kill";
    case LabelProvenance::Oracle: return "oracle";
    case LabelProvenance::SbtgExhausted: return "sbtg-exhausted";
    case LabelProvenance::Assumed: return "assumed";
    case LabelProvenance::Manual: return "manual";
  }
  return "?";
}

KillVerdict classify(const Trace& trace_orig, const Trace& trace_mut,
                     const std::string& mutated_signal, const std::vector<std::string>& outputs,
                     const StlFormula& phi, const SimConfig& cfg, double tol) {
  if (trace_orig.rows() != trace_mut.rows())
    throw LengthMismatch(trace_orig.rows(), trace_mut.rows());

  KillVerdict v;
  {
    const auto s = trace_orig.signal(mutated_signal);
    const auto sp = trace_mut.signal(mutated_signal);
    v.weak = ((s - sp).cwiseAbs().array() > tol).any();
  }
  for (const auto& name : outputs) {
    const auto o = trace_orig.signal(name);
    const auto op = trace_mut.signal(name);
    if (((o - op).cwiseAbs().array() > tol).any()) {
      v.strong = true;
      break;
    }
  }
  v.rho_orig = robustness(trace_orig, phi, cfg).value;
  v.rho_mut = robustness(trace_mut, phi, cfg).value;
  v.phi = v.rho_orig > 0.0 && v.rho_mut < 0.0;
  v.output_digest = trace_digest(trace_mut, outputs);
  return v;
}

std::uint64_t trace_digest(const Trace& trace, const std::vector<std::string>& signals) {
  // FNV-1a over the raw sample bits, deterministic across runs.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& name : signals) {
    const auto col = trace.signal(name);
    for (long j = 0; j < col.size(); ++j) feed(col[j]);
  }
  return h;
}

ScoreReport score_counts(const KillMatrix& km) {
  ScoreReport r;
  r.mutants_total = km.cols();
  for (int m = 0; m < km.cols(); ++m) {
    switch (km.mutants[static_cast<std::size_t>(m)].label) {
      case MutantLabel::Invalid: r.invalid++; continue;
      case MutantLabel::Equivalent:
        r.valid++;
        r.equivalent++;
        continue;
      case MutantLabel::PhiTriviallyDifferent: r.valid++; break;
      case MutantLabel::NtdPhi:
        r.valid++;
        r.phi_killable++;
        break;
    }
    bool killed = false, phi_killed = false;
    for (int t = 0; t < km.tests(); ++t) {
      killed = killed || km.cell(t, m).strong;
      phi_killed = phi_killed || km.cell(t, m).phi;
    }
    if (killed) r.killed++;
    if (phi_killed) r.phi_killed++;
  }
  r.killable = r.valid - r.equivalent;
  return r;
}

ScoreReport mutation_score(const KillMatrix& km) {
  const ScoreReport r = score_counts(km);
  if (r.killable == 0) throw ZeroDenominator("no killable mutants (valid - equivalent is zero)");
  if (r.phi_killable == 0) throw ZeroDenominator("no non-phi-trivially-different mutants");
  return r;
}

std::string format_percent(double ratio) {
  // Truncate toward zero at two decimals; a hair of slack keeps exact
  // ratios like 1/4 from losing their last cent to binary rounding.
  const double pct = ratio * 100.0;
  const double truncated = std::floor(pct * 100.0 + 1e-9) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", truncated);
  return buf;
}

KillMatrix filter_tests(const KillMatrix& km, const std::vector<std::string>& test_ids) {
  KillMatrix out;
  out.mutants = km.mutants;
  std::vector<int> rows;
  for (const auto& id : test_ids) {
    const auto it = std::find(km.test_ids.begin(), km.test_ids.end(), id);
    if (it == km.test_ids.end()) continue;
    rows.push_back(static_cast<int>(it - km.test_ids.begin()));
    out.test_ids.push_back(id);
  }
  out.resize_cells();
  for (int t = 0; t < out.tests(); ++t)
    for (int m = 0; m < out.cols(); ++m) out.cell(t, m) = km.cell(rows[static_cast<std::size_t>(t)], m);
  return out;
}

namespace {

std::vector<std::vector<int>> phi_kill_sets(const KillMatrix& km) {
  std::vector<std::vector<int>> kills(static_cast<std::size_t>(km.cols()));
  for (int m = 0; m < km.cols(); ++m)
    for (int t = 0; t < km.tests(); ++t)
      if (km.cell(t, m).phi) kills[static_cast<std::size_t>(m)].push_back(t);
  return kills;
}

}  // namespace

SubsumptionReport dynamic_subsumption(const KillMatrix& km) {
  SubsumptionReport report;
  const auto kills = phi_kill_sets(km);

  // Duplicates: same phi-kill vector and identical output digests per test.
  std::map<std::pair<std::vector<int>, std::vector<std::uint64_t>>, std::vector<int>> groups;
  for (int m = 0; m < km.cols(); ++m) {
    if (km.mutants[static_cast<std::size_t>(m)].label == MutantLabel::Invalid) continue;
    std::vector<std::uint64_t> digests;
    digests.reserve(static_cast<std::size_t>(km.tests()));
    for (int t = 0; t < km.tests(); ++t) digests.push_back(km.cell(t, m).output_digest);
    groups[{kills[static_cast<std::size_t>(m)], digests}].push_back(m);
  }
  for (auto& [key, members] : groups)
    if (members.size() >= 2) report.duplicate_groups.push_back(members);

  for (int i = 0; i < km.cols(); ++i) {
    if (kills[static_cast<std::size_t>(i)].empty()) continue;
    for (int j = 0; j < km.cols(); ++j) {
      if (i == j) continue;
      if (std::includes(kills[static_cast<std::size_t>(j)].begin(), kills[static_cast<std::size_t>(j)].end(),
                        kills[static_cast<std::size_t>(i)].begin(), kills[static_cast<std::size_t>(i)].end()))
        report.subsumes.emplace_back(i, j);
    }
  }
  return report;
}

namespace {

std::vector<std::string> greedy_cover(const KillMatrix& km,
                                      const std::function<bool(const KillVerdict&)>& hit) {
  std::set<int> uncovered;
  for (int m = 0; m < km.cols(); ++m)
    for (int t = 0; t < km.tests(); ++t)
      if (hit(km.cell(t, m))) {
        uncovered.insert(m);
        break;
      }

  std::vector<std::string> picked;
  std::set<int> picked_rows;
  while (!uncovered.empty()) {
    int best_row = -1;
    int best_gain = 0;
    for (int t = 0; t < km.tests(); ++t) {
      if (picked_rows.count(t)) continue;
      int gain = 0;
      for (int m : uncovered)
        if (hit(km.cell(t, m))) ++gain;
      const bool better =
          gain > best_gain ||
          (gain == best_gain && gain > 0 && best_row >= 0 &&
           km.test_ids[static_cast<std::size_t>(t)] < km.test_ids[static_cast<std::size_t>(best_row)]);
      if (better) {
        best_gain = gain;
        best_row = t;
      }
    }
    if (best_row < 0 || best_gain == 0) break;  // coverage fixed point
    picked_rows.insert(best_row);
    picked.push_back(km.test_ids[static_cast<std::size_t>(best_row)]);
    for (auto it = uncovered.begin(); it != uncovered.end();) {
      if (hit(km.cell(best_row, *it)))
        it = uncovered.erase(it);
      else
        ++it;
    }
  }
  return picked;
}

}  // namespace

std::vector<std::string> greedy_reduce(const KillMatrix& km) {
  return greedy_cover(km, [](const KillVerdict& v) { return v.phi; });
}

std::vector<std::string> greedy_reduce_strong(const KillMatrix& km) {
  return greedy_cover(km, [](const KillVerdict& v) { return v.strong; });
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string kill_matrix_to_csv(const KillMatrix& km) {
  std::string out = "test";
  for (const auto& m : km.mutants) out += "," + m.id;
  out += "\nlabel";
  for (const auto& m : km.mutants) out += std::string(",") + to_string(m.label);
  out += "\n";
  for (int t = 0; t < km.tests(); ++t) {
    out += km.test_ids[static_cast<std::size_t>(t)];
    for (int m = 0; m < km.cols(); ++m) {
      const KillVerdict& v = km.cell(t, m);
      out += ",";
      if (v.sim_failed) {
        out += "ERR;;";
      } else {
        out += v.weak ? "W" : "-";
        out += v.strong ? "S" : "-";
        out += v.phi ? "P" : "-";
        out += ";" + format_double(v.rho_orig) + ";" + format_double(v.rho_mut);
      }
    }
    out += "\n";
  }
  return out;
}

KillMatrix kill_matrix_from_csv(const std::string& csv) {
  KillMatrix km;
  std::istringstream in(csv);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
      const auto comma = s.find(',', pos);
      out.push_back(s.substr(pos, comma == std::string::npos ? comma : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return out;
  };

  if (!std::getline(in, line)) throw Error("empty kill matrix csv");
  auto header = split(line);
  if (header.empty() || header[0] != "test") throw Error("kill matrix csv: bad header");
  for (std::size_t i = 1; i < header.size(); ++i) {
    MutantColumn col;
    col.id = header[i];
    km.mutants.push_back(std::move(col));
  }

  if (!std::getline(in, line)) throw Error("kill matrix csv: missing label row");
  auto labels = split(line);
  if (labels.size() != header.size() || labels[0] != "label")
    throw Error("kill matrix csv: bad label row");
  for (std::size_t i = 1; i < labels.size(); ++i) {
    auto& m = km.mutants[i - 1];
    if (labels[i] == "ntd_phi") m.label = MutantLabel::NtdPhi;
    else if (labels[i] == "phi_trivially_different") m.label = MutantLabel::PhiTriviallyDifferent;
    else if (labels[i] == "equivalent") m.label = MutantLabel::Equivalent;
    else if (labels[i] == "invalid") m.label = MutantLabel::Invalid;
    else throw Error("kill matrix csv: unknown label " + labels[i]);
  }

  std::vector<KillVerdict> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != header.size()) throw Error("kill matrix csv: ragged row " + row[0]);
    km.test_ids.push_back(row[0]);
    for (std::size_t i = 1; i < row.size(); ++i) {
      KillVerdict v;
      const std::string& cell = row[i];
      const auto semi1 = cell.find(';');
      const auto semi2 = cell.find(';', semi1 == std::string::npos ? semi1 : semi1 + 1);
      if (semi1 == std::string::npos || semi2 == std::string::npos)
        throw Error("kill matrix csv: bad cell '" + cell + "'");
      const std::string flags = cell.substr(0, semi1);
      if (flags == "ERR") {
        v.sim_failed = true;
      } else {
        if (flags.size() != 3) throw Error("kill matrix csv: bad flags '" + flags + "'");
        v.weak = flags[0] == 'W';
        v.strong = flags[1] == 'S';
        v.phi = flags[2] == 'P';
        v.rho_orig = std::strtod(cell.substr(semi1 + 1, semi2 - semi1 - 1).c_str(), nullptr);
        v.rho_mut = std::strtod(cell.substr(semi2 + 1).c_str(), nullptr);
      }
      cells.push_back(v);
    }
  }
  km.cells = std::move(cells);
  return km;
}

}  // namespace pbmt
