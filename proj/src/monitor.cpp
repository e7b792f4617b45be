#include "pbmt/monitor.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "pbmt/errors.hpp"

namespace pbmt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Interval bounds in seconds -> inclusive sample offsets.
struct Window {
  int lo;
  int hi;  // relative offsets; hi = INT_MAX marks "to end of trace"
};

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Window to_window(const StlInterval& i, double sample_time) {
  Window w{round_half_up(i.lo / sample_time),
           i.hi ? round_half_up(*i.hi / sample_time) : std::numeric_limits<int>::max()};
  return w;
}

Eigen::VectorXd predicate_margin(const Trace& trace, const StlPredicate& p) {
  Eigen::VectorXd x = trace.signal(p.signal);
  if (p.signal2) x = (x - trace.signal(*p.signal2).eval()).cwiseAbs();
  const double c = p.threshold;
  switch (p.op) {
    case RelOp::Ge:
    case RelOp::Gt: return x.array() - c;
    case RelOp::Le:
    case RelOp::Lt: return c - x.array();
    case RelOp::Eq: return -(x.array() - c).abs();
    case RelOp::Ne: return (x.array() - c).abs();
  }
  return x;
}

// Sliding min (or max) of v over inclusive windows [j+w.lo, min(j+w.hi, k-1)],
// computed with a monotonic index deque. Empty windows become `vacuous`.
Eigen::VectorXd window_fold(const Eigen::VectorXd& v, Window w, bool take_min, double vacuous,
                            bool& saw_empty) {
  const int k = static_cast<int>(v.size());
  Eigen::VectorXd out(k);
  std::deque<int> dq;
  int added = k;  // next index to push, walking right-to-left
  for (int j = k - 1; j >= 0; --j) {
    const int lo = j > k - 1 - w.lo ? k : j + w.lo;  // guard overflow
    const int hi = w.hi >= k - 1 - j ? k - 1 : j + w.hi;
    if (lo > k - 1 || lo > hi) {  // empty window (incl. degenerate intervals)
      out[j] = vacuous;
      saw_empty = true;
      continue;
    }
    while (added - 1 >= lo) {
      --added;
      while (!dq.empty() &&
             (take_min ? v[dq.back()] >= v[added] : v[dq.back()] <= v[added]))
        dq.pop_back();
      dq.push_back(added);
    }
    while (!dq.empty() && dq.front() > hi) dq.pop_front();
    out[j] = v[dq.front()];
  }
  return out;
}

struct RobustnessEval {
  const Trace& trace;
  double sample_time;
  bool saw_empty = false;

  Eigen::VectorXd eval(const StlFormula& f) {
    const int k = trace.rows();
    switch (f.kind) {
      case StlFormula::Kind::Predicate: return predicate_margin(trace, f.pred);
      case StlFormula::Kind::Not: return -eval(*f.left);
      case StlFormula::Kind::And: {
        const Eigen::VectorXd l = eval(*f.left);
        return l.cwiseMin(eval(*f.right));
      }
      case StlFormula::Kind::Or: {
        const Eigen::VectorXd l = eval(*f.left);
        return l.cwiseMax(eval(*f.right));
      }
      case StlFormula::Kind::Always:
        return window_fold(eval(*f.left), to_window(f.interval, sample_time), true, kInf, saw_empty);
      case StlFormula::Kind::Eventually:
        return window_fold(eval(*f.left), to_window(f.interval, sample_time), false, -kInf,
                           saw_empty);
      case StlFormula::Kind::Rise: {
        const Eigen::VectorXd p = predicate_margin(trace, f.pred);
        Eigen::VectorXd out(k);
        out[0] = -kInf;
        for (int j = 1; j < k; ++j) out[j] = std::min(p[j], -p[j - 1]);
        return out;
      }
      case StlFormula::Kind::Until: {
        const Eigen::VectorXd r1 = eval(*f.left);
        const Eigen::VectorXd r2 = eval(*f.right);
        const Window w = to_window(f.interval, sample_time);
        Eigen::VectorXd out(k);
        for (int j = 0; j < k; ++j) {
          const int lo = j > k - 1 - w.lo ? k : j + w.lo;
          const int hi = w.hi >= k - 1 - j ? k - 1 : j + w.hi;
          double best = -kInf;
          if (lo > k - 1 || lo > hi) saw_empty = true;
          double run = kInf;
          for (int jp = j; jp <= hi; ++jp) {
            run = std::min(run, r1[jp]);
            if (jp >= lo) best = std::max(best, std::min(r2[jp], run));
          }
          out[j] = best;
        }
        return out;
      }
    }
    return Eigen::VectorXd::Zero(k);
  }
};

struct BooleanEval {
  const Trace& trace;
  double sample_time;

  std::vector<char> eval(const StlFormula& f) {
    const int k = trace.rows();
    std::vector<char> out(static_cast<std::size_t>(k), 0);
    switch (f.kind) {
      case StlFormula::Kind::Predicate: return predicate_profile(trace, f.pred);
      case StlFormula::Kind::Not: {
        out = eval(*f.left);
        for (auto& b : out) b = !b;
        return out;
      }
      case StlFormula::Kind::And: {
        const auto l = eval(*f.left);
        const auto r = eval(*f.right);
        for (int j = 0; j < k; ++j) out[j] = l[j] && r[j];
        return out;
      }
      case StlFormula::Kind::Or: {
        const auto l = eval(*f.left);
        const auto r = eval(*f.right);
        for (int j = 0; j < k; ++j) out[j] = l[j] || r[j];
        return out;
      }
      case StlFormula::Kind::Always:
      case StlFormula::Kind::Eventually: {
        const bool is_always = f.kind == StlFormula::Kind::Always;
        const auto child = eval(*f.left);
        const Window w = to_window(f.interval, sample_time);
        for (int j = 0; j < k; ++j) {
          const int lo = j > k - 1 - w.lo ? k : j + w.lo;
          const int hi = w.hi >= k - 1 - j ? k - 1 : j + w.hi;
          bool acc = is_always;  // empty window: always true, eventually false
          for (int jp = lo; jp <= hi; ++jp) {
            if (is_always)
              acc = acc && child[jp];
            else
              acc = acc || child[jp];
          }
          out[j] = acc;
        }
        return out;
      }
      case StlFormula::Kind::Until: {
        const auto b1 = eval(*f.left);
        const auto b2 = eval(*f.right);
        const Window w = to_window(f.interval, sample_time);
        // Closed prefix convention: phi1 must hold on [j, j'] including j',
        // matching the robustness formula.
        for (int j = 0; j < k; ++j) {
          const int lo = j > k - 1 - w.lo ? k : j + w.lo;
          const int hi = w.hi >= k - 1 - j ? k - 1 : j + w.hi;
          bool sat = false;
          bool prefix = true;
          for (int jp = j; jp <= hi; ++jp) {
            prefix = prefix && b1[jp];
            if (jp >= lo && prefix && b2[jp]) {
              sat = true;
              break;
            }
            if (!prefix) break;
          }
          out[j] = sat;
        }
        return out;
      }
      case StlFormula::Kind::Rise: {
        const auto p = predicate_profile(trace, f.pred);
        out[0] = 0;
        for (int j = 1; j < k; ++j) out[j] = p[j] && !p[j - 1];
        return out;
      }
    }
    return out;
  }
};

}  // namespace

std::vector<char> predicate_profile(const Trace& trace, const StlPredicate& pred) {
  const Eigen::VectorXd x = trace.signal(pred.signal);
  const int k = static_cast<int>(x.size());
  std::vector<char> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    double v = x[j];
    if (pred.signal2) v = std::abs(v - trace.signal(*pred.signal2)[j]);
    bool b = false;
    switch (pred.op) {
      case RelOp::Lt: b = v < pred.threshold; break;
      case RelOp::Le: b = v <= pred.threshold; break;
      case RelOp::Gt: b = v > pred.threshold; break;
      case RelOp::Ge: b = v >= pred.threshold; break;
      case RelOp::Eq: b = v == pred.threshold; break;
      case RelOp::Ne: b = v != pred.threshold; break;
    }
    out[j] = b;
  }
  return out;
}

Robustness robustness(const Trace& trace, const StlFormula& phi, const SimConfig& cfg) {
  if (trace.rows() < 1) throw Error("robustness needs a nonempty trace");
  RobustnessEval ev{trace, cfg.sample_time};
  const Eigen::VectorXd v = ev.eval(phi);
  return Robustness{v[0], 0, ev.saw_empty};
}

bool boolean_sat(const Trace& trace, const StlFormula& phi, const SimConfig& cfg) {
  if (trace.rows() < 1) throw Error("boolean_sat needs a nonempty trace");
  BooleanEval ev{trace, cfg.sample_time};
  return ev.eval(phi)[0] != 0;
}

}  // namespace pbmt
