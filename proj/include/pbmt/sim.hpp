#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbmt/model.hpp"

namespace pbmt {

struct SimConfig {
  double sample_time = 1.0;  // seconds per step, > 0
  double horizon = 1.0;      // total duration in seconds

  // k = floor(horizon / sample_time) + 1; the small epsilon keeps exact
  // multiples (e.g. 30 / 0.04 -> 751 samples) from losing a step to
  // floating-point division.
  int sample_count() const;
};

// One simulation's worth of every signal: model inputs and outputs by block
// id, plus every line by its "src.port->dst.port" id. Row-major storage so
// the simulator writes each step contiguously.
using TraceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Trace {
  Eigen::VectorXd times;
  std::vector<std::string> names;  // column order: inputs, outputs, lines
  std::unordered_map<std::string, int> column;
  TraceMatrix values;  // sample_count rows, one column per signal

  int rows() const { return static_cast<int>(values.rows()); }
  bool has_signal(const std::string& name) const { return column.count(name) != 0; }
  int col(const std::string& name) const;  // throws MissingSignal
  // Owning copy of one signal; values.col(col(name)) gives a zero-copy view.
  Eigen::VectorXd signal(const std::string& name) const { return values.col(col(name)); }
};

// Piecewise-constant input program: one row per model input (declaration
// order), one column per control point. Control points sit at uniform times
// over the horizon and hold until the next one.
struct TestCase {
  Eigen::MatrixXd controls;

  int control_points() const { return static_cast<int>(controls.cols()); }
  bool same_as(const TestCase& other) const {
    return controls.rows() == other.controls.rows() &&
           controls.cols() == other.controls.cols() &&
           (controls.array() == other.controls.array()).all();
  }
};

// Validates, flattens and index-compiles a model once; run() is then cheap
// and safe to call from many threads concurrently.
class Simulator {
 public:
  Simulator(const Model& model, const SimConfig& cfg);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  const Model& flat_model() const;
  const SimConfig& config() const;

  // Deterministic fixed-step run; throws NonFiniteSignal when a value goes
  // NaN/inf, Error when the test is malformed or out of range.
  Trace run(const TestCase& test) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Trace simulate(const Model& model, const TestCase& test, const SimConfig& cfg);

// Euclidean distance between two equal-length signals.
double signal_distance(const Eigen::Ref<const Eigen::VectorXd>& s,
                       const Eigen::Ref<const Eigen::VectorXd>& s_prime);

}  // namespace pbmt
