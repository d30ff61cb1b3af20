#pragma once

// Time integration of the truncated Navier-Stokes system
//
//     du + (L u + B(u,u)) dt = (h + phi) dt + sqrt(eps) sum_k b_k dbeta_k e_k
//
// by exponential Euler: the Stokes part is integrated exactly per mode, the
// nonlinearity and forcing are frozen over a step, and the additive noise is
// added as the exact Ornstein-Uhlenbeck increment of each mode.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "nsldp/spectral.hpp"

namespace nsldp {

/// Amplitudes above this magnitude abort integration.
inline constexpr double kBlowupThreshold = 1e12;

struct FlowConfig {
  double dt = 1e-3;
  SpectralField forcing;  // h
  NoiseSpec noise;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  /// false drops B(u,u); the system is then a product of OU processes.
  bool nonlinear = true;

  const BasisPtr& basis() const { return forcing.basis(); }
  /// Throws InvalidArgument on dt <= 0, eps < 0, or mismatched bases.
  void validate() const;
};

/// Forcing of the default nonlinear configuration: A on mode (1,0), iA on
/// (1,1) and A(1+i)/2 on (2,-1); modes outside the basis are skipped.  With
/// K = 4, unit power-law noise and A = 2 the deterministic flow has a single
/// stable equilibrium.
SpectralField default_forcing(const BasisPtr& basis, double amplitude = 2.0);

/// Deterministic Gaussian stream.  The state (engine and distribution cache)
/// round-trips through text so long runs can be checkpointed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Seed for the i-th independent stream derived from a base seed.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) { return base ^ index; }

/// Per-mode exponential-Euler coefficients for a given (basis, dt, noise, eps).
class ExpEuler {
 public:
  explicit ExpEuler(const FlowConfig& cfg);

  double dt() const noexcept { return dt_; }
  /// e^{-lambda_k dt}
  const std::vector<double>& decay() const noexcept { return decay_; }
  /// (1 - e^{-lambda_k dt}) / lambda_k
  const std::vector<double>& weight() const noexcept { return weight_; }
  /// Standard deviation of each real coordinate of the OU increment.
  const std::vector<double>& noise_std() const noexcept { return noise_std_; }

  /// u <- E u + W (h + phi - B(u,u)) [+ noise].  `phi` and `rng` may be null.
  /// Throws NumericalBlowup naming `step_index`.
  void advance(SpectralField& u, const SpectralField* phi, Rng* rng, std::int64_t step_index) const;

  /// Explicit part h + phi - B(u,u) of the update.
  SpectralField drift(const SpectralField& u, const SpectralField* phi) const;

 private:
  SpectralField forcing_;
  bool nonlinear_ = true;
  double dt_;
  std::vector<double> decay_;
  std::vector<double> weight_;
  std::vector<double> noise_std_;
};

void check_finite(const SpectralField& u, std::int64_t step_index);

SpectralField step_deterministic(const SpectralField& u, const FlowConfig& cfg, std::int64_t step_index = 0);
SpectralField step_stochastic(const SpectralField& u, const FlowConfig& cfg, Rng& rng,
                              std::int64_t step_index = 0);
SpectralField step_controlled(const SpectralField& u, const FlowConfig& cfg, const SpectralField& phi,
                              std::int64_t step_index = 0);

/// Piecewise-constant control on a uniform grid of [0, T]; values[i] acts on
/// [i dt, (i+1) dt).
struct ControlPath {
  double dt = 0.0;
  std::vector<SpectralField> values;

  static ControlPath zero(BasisPtr basis, double T, double dt);
  static ControlPath constant(const SpectralField& phi, double T, double dt);

  std::size_t steps() const noexcept { return values.size(); }
  double horizon() const noexcept { return dt * static_cast<double>(values.size()); }
  const BasisPtr& basis() const { return values.front().basis(); }
  void validate() const;
};

void write_control_csv(std::ostream& os, const ControlPath& phi);
ControlPath read_control_csv(std::istream& is, BasisPtr basis);

struct StateObservables {
  double norm_h = 0.0;
  double norm_v = 0.0;
};

/// States recorded on a uniform grid times[i] = i * dt (dt is the recording
/// interval, a whole multiple of the integrator step).
struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<SpectralField> states;
  std::vector<StateObservables> observables;

  std::size_t size() const noexcept { return states.size(); }
  void push(double t, const SpectralField& u);
};

/// Integrates for `steps` steps and records every `record_every` steps
/// (including the initial state).
Trajectory integrate_deterministic(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps,
                                   std::int64_t record_every = 1);
/// Uses Rng(cfg.seed) unless a stream is supplied.
Trajectory integrate_stochastic(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps,
                                std::int64_t record_every = 1, Rng* rng = nullptr);
/// Control steps must equal cfg.dt.  Records every step.
Trajectory integrate_controlled(const SpectralField& u0, const FlowConfig& cfg, const ControlPath& phi);

/// Endpoint S^phi(T) u0 without recording.
SpectralField flow_map(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps,
                       const ControlPath* phi = nullptr, Rng* rng = nullptr);

// --- Foias-Prodi coupling --------------------------------------------------

struct CouplingConfig {
  double gain = 0.0;    // kappa
  std::size_t modes = 0;  // number of nudged low modes N
  void validate() const;
};

struct ContractionLog {
  std::vector<double> times;
  std::vector<double> distance;       // ||u - w||
  std::vector<double> grad_integral;  // int_0^t |u|_V^2 ds

  /// Least-squares slope of log ||u - w|| against t on records where the
  /// distance exceeds floor_rel * distance[0] (default keeps all but the
  /// round-off plateau).
  double decay_slope(double floor_rel = 1e-10) const;
};

struct CoupledRun {
  Trajectory reference;  // u, the controlled flow
  Trajectory nudged;     // w
  ContractionLog log;
};

/// Advances u' + Lu + B(u,u) = h + phi and
/// w' + Lw + B(w,w) = h + phi + kappa P_N (u - w) on a common grid.
/// `phi` may be null (zero control); otherwise its step must equal cfg.dt and
/// it must cover T.
CoupledRun integrate_coupled(const SpectralField& u0, const SpectralField& w0, const FlowConfig& cfg,
                             const CouplingConfig& coupling, const ControlPath* phi, double T,
                             std::int64_t record_every = 1);

// --- persistence ------------------------------------------------------------

/// Columns t,norm_h,norm_v.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

struct Checkpoint {
  std::int64_t step = 0;
  double time = 0.0;
  SpectralField state;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path, BasisPtr basis = nullptr);

// Deviation of a controlled trajectory from the free one, against the bound
//   |S^phi(t)u0 - S(t)u0|^2 <= C exp(c (|u0|^2 + t |h|^2)) int_0^t e^{-lambda_1 (t-s)} |phi(s)|^2 ds.
struct DeviationSample {
  std::vector<double> times;
  std::vector<double> deviation2;  // squared H-distance
  std::vector<double> integral;    // discounted control energy, exact for piecewise-constant phi
  std::vector<double> exponent;    // |u0|^2 + t |h|^2
};

DeviationSample deviation_sample(const SpectralField& u0, const ControlPath& phi, const FlowConfig& cfg,
                                 std::int64_t record_every = 1);

struct DeviationFit {
  double C = 0.0;
  double c = 0.0;
  std::size_t points = 0;
};

/// Tightest upper envelope log C + c x of log(deviation2 / integral) over all
/// samples (c >= 0), minimising the mean gap.
DeviationFit fit_deviation_bound(const std::vector<DeviationSample>& samples);

/// min over t > 0 of bound / measured; >= 1 when the bound holds everywhere.
double deviation_bound_ratio(const DeviationSample& sample, const DeviationFit& fit);

}  // namespace nsldp
