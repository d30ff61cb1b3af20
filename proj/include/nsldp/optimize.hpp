#pragma once

#include <functional>
#include <string>
#include <vector>

namespace nsldp {

struct OptimizerSettings {
  int max_iterations = 5000;
  /// Stop when the Euclidean gradient norm drops below this.
  double gradient_tolerance = 1e-6;
  /// Also stop when the relative decrease stays below this for `stall_window`
  /// consecutive iterations.
  double function_tolerance = 1e-14;
  int stall_window = 8;
  /// History length for the limited-memory quasi-Newton direction; 0 means
  /// plain steepest descent with backtracking.
  int memory = 12;
};

struct OptimizerReport {
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// f(x, grad) returns the objective and fills grad (same size as x).
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

/// Minimises f from x (updated in place) with an Armijo backtracking line
/// search along L-BFGS directions, falling back to the negative gradient
/// whenever the quasi-Newton direction is not a descent direction.
OptimizerReport minimize_lbfgs(const Objective& f, std::vector<double>& x, const OptimizerSettings& settings);

}  // namespace nsldp
