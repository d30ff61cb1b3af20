#pragma once

// Recovering a stationary measure from time averages taken after a family of
// stopping times.  For a start v with stopping time tau(v),
//
//   R_delta psi(v) = (1/delta) E_v int_tau^{tau+delta} psi(u_t) dt,
//   lambda(psi)    = (R_delta psi, mu).
//
// Finite chains are evaluated exactly with matrix powers (discrete time, the
// window is the delta states after tau: steps tau+1 .. tau+delta).  The flow
// adapter estimates the same quantities by Monte Carlo.
//
// Stopping times are deterministic per state.  With a state-dependent tau,
// lambda is in general not equal to mu, and lambda(P_s psi) drifts with s;
// the checks below report the discrepancy rather than assume it away.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsldp/attractor.hpp"
#include "nsldp/flow.hpp"
#include "nsldp/measure.hpp"

namespace nsldp {

/// Discrete-time chain with a stopping time per state.
struct FiniteChain {
  Eigen::MatrixXd P;
  std::vector<int> tau;

  /// Validates: square, entries >= 0, rows sum to 1 within 1e-12, tau >= 0.
  static FiniteChain make(Eigen::MatrixXd P, std::vector<int> tau);

  int size() const noexcept { return static_cast<int>(P.rows()); }
  bool irreducible() const;
  /// Period 1; meaningful for irreducible chains.
  bool aperiodic() const;
};

/// Text format: n, then n rows of P, then the n stopping times.  '#' starts
/// a comment.
FiniteChain read_chain(std::istream& is);
FiniteChain load_chain(const std::string& path);
void write_chain(std::ostream& os, const FiniteChain& c);

/// Random irreducible aperiodic chain with n states and tau in [0, max_tau].
/// Every row has a self-loop, so the chain is aperiodic.
FiniteChain random_chain(int n, int max_tau, Rng& rng);

/// Solves pi P = pi, sum pi = 1.  Throws InvalidArgument for reducible or
/// periodic chains; the residual ||pi P - pi||_inf is at most 1e-12.
Eigen::VectorXd chain_stationary(const FiniteChain& c);

/// P^t psi.
Eigen::VectorXd chain_semigroup(const FiniteChain& c, const Eigen::VectorXd& psi, int t);

/// R_delta psi at every state.
Eigen::VectorXd r_delta(const FiniteChain& c, int delta, const Eigen::VectorXd& psi);
double r_delta(const FiniteChain& c, int v, int delta, const Eigen::VectorXd& psi);

/// (R_delta psi, mu).
double lambda_functional(const FiniteChain& c, const Eigen::VectorXd& mu, int delta, const Eigen::VectorXd& psi);

/// mu(interior) <= lambda(interior) <= lambda(closure) <= mu(closure).
struct SandwichReport {
  double mu_interior = 0.0;
  double lambda_interior = 0.0;
  double lambda_closure = 0.0;
  double mu_closure = 0.0;
  double tolerance = 0.0;
  bool lower = false;   // mu(interior) <= lambda(interior)
  bool middle = false;  // lambda(interior) <= lambda(closure)
  bool upper = false;   // lambda(closure) <= mu(closure)
  bool passed() const { return lower && middle && upper; }
};

/// Sets are 0/1 indicator vectors; interior must be contained in closure.
SandwichReport sandwich_check(const FiniteChain& c, const Eigen::VectorXd& mu, int delta,
                              const Eigen::VectorXd& interior, const Eigen::VectorXd& closure,
                              double tolerance = 1e-10);

struct ShiftReport {
  double base = 0.0;  // lambda(psi)
  std::vector<int> shifts;
  std::vector<double> values;  // lambda(P_s psi)
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

ShiftReport shift_invariance_check(const FiniteChain& c, const Eigen::VectorXd& mu, int delta,
                                   const Eigen::VectorXd& psi, const std::vector<int>& shifts,
                                   double tolerance = 1e-10);

/// sup_v |P_t psi(v) - (psi, pi)| along t, compared with C |z_2|^t where z_2
/// is the second largest eigenvalue modulus of P and C comes from the
/// eigen-decomposition of psi.
struct MixingRow {
  int t = 0;
  double deviation = 0.0;
  double rate_bound = 0.0;
};

struct MixingReport {
  double second_eigenvalue = 0.0;  // |z_2|
  std::vector<std::vector<MixingRow>> rows;  // per psi
  bool decreasing = true;
  bool bounded = true;  // sup |P_t psi| <= sup |psi|
  bool within_rate = true;
  std::vector<std::string> diagnostics;
};

MixingReport b0_mixing_check(const FiniteChain& c, const std::vector<Eigen::VectorXd>& psi_list,
                             const std::vector<int>& t_list);

/// Text report with one pass/fail line per inequality.
void write_sandwich_report(std::ostream& os, const SandwichReport& r);
void write_shift_report(std::ostream& os, const ShiftReport& r);

// ---------------------------------------------------------------------------
// Simulated models

using Observable = std::function<double(const SpectralField&)>;

/// A Markov process on Galerkin fields advanced in steps of dt, with a
/// deterministic stopping time per state and a bounded-set gauge.
class MarkovModel {
 public:
  virtual ~MarkovModel() = default;

  virtual BasisPtr basis() const = 0;
  virtual double dt() const = 0;
  /// One step of the process; `step_index` only labels errors.
  virtual void step(SpectralField& u, Rng& rng, std::int64_t step_index) const = 0;
  /// Stopping time in steps, or -1 if it does not resolve within the
  /// model's horizon.
  virtual std::int64_t stopping_steps(const SpectralField& v) const = 0;
  /// Membership in the configured bounded set.
  virtual bool in_bounded_set(const SpectralField& u) const = 0;
};

/// Stochastic Galerkin flow at cfg.epsilon; tau(v) is the first time the
/// deterministic flow from v comes within eta/4 of the attractor set, looked
/// for up to t_max.  The bounded set is the H-ball of radius gauge_radius.
class FlowModel : public MarkovModel {
 public:
  FlowModel(const FlowConfig& cfg, AttractorSet set, double eta, double t_max, double gauge_radius);

  BasisPtr basis() const override { return cfg_.basis(); }
  double dt() const override { return cfg_.dt; }
  void step(SpectralField& u, Rng& rng, std::int64_t step_index) const override;
  std::int64_t stopping_steps(const SpectralField& v) const override;
  bool in_bounded_set(const SpectralField& u) const override;

  const FlowConfig& config() const noexcept { return cfg_; }
  const AttractorSet& attractor() const noexcept { return set_; }
  double eta() const noexcept { return eta_; }

 private:
  FlowConfig cfg_;
  AttractorSet set_;
  double eta_;
  double t_max_;
  double gauge_radius_;
  ExpEuler stepper_;
};

/// Mean with a normal 95% interval from independent replicates.
struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
};

/// R_delta psi(v) from n runs; the window [tau, tau + delta] is sampled at
/// the steps after tau.  `shift` moves the window to [tau + s, tau + s + delta],
/// which by the Markov property equals R_delta (P_s psi)(v).  Run j uses
/// stream_seed(seed, j).  Throws StoppingTimeout if tau(v) does not resolve.
MonteCarloEstimate r_delta_mc(const MarkovModel& model, const SpectralField& v, double delta, const Observable& psi,
                              std::size_t n, std::uint64_t seed, double shift = 0.0, int threads = 1);

/// lambda(psi) over the given samples of mu, one run per sample; sample i
/// uses stream_seed(seed, i).  Runs are independent given the samples.
MonteCarloEstimate lambda_mc(const MarkovModel& model, const std::vector<SpectralField>& mu_samples, double delta,
                             const Observable& psi, std::uint64_t seed, double shift = 0.0, int threads = 1);

/// lambda(P_s psi) against lambda(psi) with common random numbers.
struct ShiftEstimate {
  MonteCarloEstimate base;
  std::vector<double> shifts;
  std::vector<MonteCarloEstimate> values;
  /// |difference| within the combined 95% half-widths for every shift.
  bool agree = true;
};

ShiftEstimate shift_invariance_mc(const MarkovModel& model, const std::vector<SpectralField>& mu_samples,
                                  double delta, const Observable& psi, const std::vector<double>& shifts,
                                  std::uint64_t seed, int threads = 1);

/// Monte-Carlo analogue of b0_mixing_check: sup over `starts` of
/// |P_t psi - mean| for each t, with common random numbers across starts.
struct MixingEstimate {
  std::vector<double> times;
  std::vector<double> sup_deviation;
  std::vector<double> std_error;  // of the maximising start
  /// Least-squares slope of ln sup_deviation against t.
  double decay_rate = 0.0;
  bool decreasing = true;
  bool bounded = true;
};

MixingEstimate b0_mixing_mc(const MarkovModel& model, const Observable& psi, double psi_mean, double psi_sup,
                            const std::vector<SpectralField>& starts, const std::vector<double>& times,
                            std::size_t n, std::uint64_t seed, int threads = 1);

/// Fraction of runs from `starts` that leave the bounded set during [0, T];
/// passes when the upper end of its 95% interval is below `eta`.
struct GaugeReport {
  BinomialEstimate left;
  double eta = 0.0;
  bool passed = false;
};

GaugeReport condition_a_gauge(const MarkovModel& model, const std::vector<SpectralField>& starts, double T,
                              std::size_t runs_per_start, double eta, std::uint64_t seed, int threads = 1);

/// Window length: the largest delta (capped at delta_max) such that the
/// deterministic flow from every probe stays in the closed eta/2
/// neighbourhood of the attractor on [tau, tau + delta].
struct DeltaSelection {
  bool selected = false;
  double delta = 0.0;
  std::size_t probes = 0;
  std::size_t timeouts = 0;  // probes whose tau did not resolve (skipped)
  std::string reason;
};

DeltaSelection select_delta(const FlowModel& model, const std::vector<SpectralField>& probes, double delta_max,
                            int threads = 1);

struct LambdaSettings {
  std::size_t outer_samples = 200;  // drawn evenly from the measure
  double delta_max = 1.0;
  /// Use this window instead of selecting one when positive.
  double delta = 0.0;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// lambda^eps of the complement of the closed eta neighbourhood of the
/// attractor, next to mu^eps of the same set.
struct LambdaReport {
  DeltaSelection delta;
  MonteCarloEstimate lambda;
  ProbabilityEstimate mu;
  std::size_t timeouts = 0;  // outer samples whose tau did not resolve
  /// mu <= lambda + combined 95% half-widths.
  bool ordering = false;
  std::string reason;
};

/// Throws StoppingTimeout if any outer sample's tau does not resolve; a
/// failed window selection is returned with lambda left empty.
LambdaReport nse_lambda_estimator(const FlowModel& model, const EmpiricalMeasure& measure,
                                  const LambdaSettings& settings);

}  // namespace nsldp
