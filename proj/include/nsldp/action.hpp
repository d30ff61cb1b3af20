#pragma once

// Action functional J_T(phi) = 1/2 int_0^T |phi|^2_{H_theta} dt and the
// minimum-action computations built on it: the quasipotential of a target
// state relative to an attractor approximation, and the exit action from a
// ball around the attractor.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsldp/flow.hpp"
#include "nsldp/optimize.hpp"

namespace nsldp {

/// 1/2 sum_i dt |phi_i|^2_{H_theta}.
double path_action(const ControlPath& phi, const NoiseSpec& noise);

/// Control that reproduces the recorded trajectory exactly under the
/// exponential-Euler stencil: phi_i = (u_{i+1} - E u_i) / W - h + B(u_i, u_i).
/// The trajectory spacing must equal cfg.dt.
ControlPath recover_control(const Trajectory& traj, const FlowConfig& cfg);

/// I_T of a recorded trajectory, i.e. J_T of recover_control(traj, cfg).
double action_of_trajectory(const Trajectory& traj, const FlowConfig& cfg);

struct ActionProblem {
  /// Fixed start point (one entry) or attractor samples for multi-start.
  std::vector<SpectralField> starts;
  SpectralField target;
  double eta = 0.05;
  double horizon = 5.0;
  double penalty = 1e4;  // rho
  /// The penalty drives ||u(T) - target|| towards inner_fraction * eta so the
  /// converged endpoint lies inside the open eta-ball.
  double inner_fraction = 0.9;
  OptimizerSettings optimizer;
  /// Optional initial guess, resized to the horizon by padding/trimming at the
  /// front with zero control.
  std::optional<ControlPath> warm_start;
  int threads = 1;

  void validate() const;
};

struct ContinuationStage {
  double eta = 0.0;
  double penalty = 0.0;
  double horizon = 0.0;
  double value = 0.0;
  bool converged = false;
};

struct ActionResult {
  double value = 0.0;  // achieved J_T
  ControlPath control;
  std::size_t start_index = 0;
  SpectralField start;
  SpectralField endpoint;
  double terminal_gap = 0.0;  // ||u(T) - target||
  bool converged = false;
  /// The target was already within eta of a start point (zero-time path).
  bool reached_at_start = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string diagnostic;
  std::vector<ContinuationStage> continuation_trace;
  /// Continuation-only diagnostics.
  bool monotone = true;
  bool saturated = false;
  std::optional<double> horizon_doubling_change;
  std::vector<std::string> warnings;
};

/// Objective value and gradient with respect to the control values and the
/// start point, computed by the discrete adjoint of ExpEuler.
struct ActionGradient {
  double value = 0.0;     // J_T + penalty
  double action = 0.0;    // J_T
  double penalty = 0.0;
  std::vector<SpectralField> control_grad;  // dObjective/dphi_i (real gradient)
  SpectralField start_grad;                 // dObjective/du_0
  SpectralField endpoint;
};

/// Terminal penalty term and its gradient with respect to u(T).
struct TerminalPenalty {
  virtual ~TerminalPenalty() = default;
  virtual double value(const SpectralField& endpoint, SpectralField* grad) const = 0;
};

/// rho * max(0, ||u - target|| - radius)^2
struct ReachPenalty final : TerminalPenalty {
  SpectralField target;
  double radius = 0.0;
  double rho = 0.0;
  double value(const SpectralField& endpoint, SpectralField* grad) const override;
};

/// rho * max(0, radius - dist(u, points))^2
struct ExitPenalty final : TerminalPenalty {
  std::vector<SpectralField> points;
  double radius = 0.0;
  double rho = 0.0;
  double value(const SpectralField& endpoint, SpectralField* grad) const override;
};

ActionGradient action_gradient(const SpectralField& start, const ControlPath& phi, const FlowConfig& cfg,
                               const TerminalPenalty& penalty);

/// Minimises J_T(phi) + rho max(0, ||u(T) - u*|| - inner_fraction*eta)^2 over
/// piecewise-constant controls, multi-starting over problem.starts.  Uses
/// cfg.dt as the control step; cfg.epsilon is ignored.
ActionResult minimize_action(const ActionProblem& problem, const FlowConfig& cfg);

struct QuasipotentialStage {
  double eta = 0.0;
  double penalty = 0.0;
  double horizon = 0.0;
};

struct QuasipotentialSchedule {
  std::vector<QuasipotentialStage> stages;
  OptimizerSettings optimizer;
  /// Re-solve the last stage with twice the horizon and report the change.
  bool check_horizon_doubling = true;
  /// Relative tolerance for the monotonicity checks and the saturation flag.
  double tolerance = 0.01;
  int threads = 1;
};

/// A decreasing-eta / increasing-rho schedule ending at (eta_final, rho_final).
QuasipotentialSchedule default_schedule(double eta_final, double horizon, int stages = 4);

/// Continuation over the schedule, warm-starting each stage from the last.
/// The trace must be non-increasing in T and non-decreasing as eta shrinks;
/// violations are reported in `warnings` and clear `monotone`.
ActionResult quasipotential(const SpectralField& target, const std::vector<SpectralField>& attractor,
                            const QuasipotentialSchedule& schedule, const FlowConfig& cfg);

struct ExitActionResult {
  double value = 0.0;  // estimated a
  bool degenerate = false;
  bool converged = false;
  SpectralField start;
  ControlPath control;
  double terminal_distance = 0.0;  // dist(u(T), attractor)
  std::string diagnostic;
};

struct ExitActionSettings {
  double penalty = 1e4;
  /// The penalty aims at dist = outer_fraction * eta (> eta).
  double outer_fraction = 1.05;
  int starts = 6;
  std::uint64_t seed = 7;
  OptimizerSettings optimizer;
  int threads = 1;
  /// Values below this are reported as degenerate (no positive lower bound seen).
  double degenerate_below = 1e-8;
};

/// inf { J_T : u(0) in B_R, dist(u(T), attractor) >= eta }, by multi-start
/// over initial points parameterised smoothly inside the open ball B_R.
ExitActionResult min_exit_action(double R, double eta, double T, const std::vector<SpectralField>& attractor,
                                 const FlowConfig& cfg, const ExitActionSettings& settings = {});

/// Structured text (JSON) summary of an ActionResult.
std::string action_result_json(const ActionResult& r);

}  // namespace nsldp
