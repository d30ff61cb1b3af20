#pragma once

// Monte-Carlo estimation of the stationary measure mu^eps by time averages
// of long stochastic trajectories, and the small-noise diagnostics built on
// it: decay outside neighbourhoods of the attractor, tightness, tube
// probabilities and the lower bound for a singleton attractor.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsldp/action.hpp"
#include "nsldp/attractor.hpp"
#include "nsldp/flow.hpp"

namespace nsldp {

struct MeasureMeta {
  double epsilon = 0.0;
  double dt = 0.0;
  double burn_in = 0.0;
  double horizon = 0.0;
  std::int64_t stride = 1;  // integrator steps between samples
  std::uint64_t seed = 0;
  int chains = 1;
};

/// Equally weighted samples, stored chain after chain in time order.
struct EmpiricalMeasure {
  std::vector<SpectralField> samples;
  std::vector<int> chain;  // chain index of each sample
  MeasureMeta meta;

  std::size_t size() const noexcept { return samples.size(); }
  double weight() const { return 1.0 / static_cast<double>(samples.size()); }
};

struct SamplingSettings {
  double burn_in = 50.0;
  double horizon = 1000.0;
  std::int64_t stride = 50;
  int chains = 1;
  int threads = 1;
  /// Start of every chain; zero field when unset.
  std::optional<SpectralField> start;
};

/// Burn-in heuristic 10 / lambda_1 * (1 + 1/eps), capped at `cap`.
double default_burn_in(double eps, double cap = 200.0);

/// Runs `chains` trajectories of length horizon (chain c uses the stream
/// stream_seed(cfg.seed, c)), discards t < burn_in and keeps every stride-th
/// state.
EmpiricalMeasure sample_stationary(double eps, const FlowConfig& cfg, const SamplingSettings& settings);

/// Proportion with an autocorrelation-corrected 95% interval.  The standard
/// error comes from non-overlapping batch means within each chain; when no
/// sample satisfies the predicate the estimate is censored and ci_hi is the
/// one-sided bound 1 - alpha^{1/n_eff}, with the effective sample size taken
/// from the batch-means variance of ||u||.
struct ProbabilityEstimate {
  double p = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double std_error = 0.0;
  std::int64_t count = 0;
  std::int64_t n = 0;
  double effective_n = 0.0;
  bool censored = false;
};

using Predicate = std::function<bool(const SpectralField&)>;

ProbabilityEstimate event_probability(const EmpiricalMeasure& m, const Predicate& pred, int batches = 20);

/// Two-sample check of stationarity: batch-means z-test on the mean of ||u||
/// between the first and second half of the samples at level `alpha`.
struct StationarityReport {
  double mean_first = 0.0;
  double mean_second = 0.0;
  double z = 0.0;
  bool passed = false;
};
StationarityReport stationarity_check(const EmpiricalMeasure& m, double alpha = 0.01);

/// ln p against 1/eps:  ln p = intercept + slope / eps, so slope estimates
/// lim eps ln p.  Points are weighted by the inverse variance of ln p; the
/// slope interval comes from a bootstrap of the residuals combined with the
/// per-point sampling error.  Censored points are excluded from the fit; if
/// every point is censored the fit is replaced by the bound
/// max_i eps_i ln(ci_hi_i), which then bounds every point's exponent.
struct DecayFit {
  std::vector<double> eps_list;
  std::vector<ProbabilityEstimate> estimates;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
  std::size_t points_used = 0;
  bool censored_bound = false;
  std::vector<std::string> warnings;

  /// slope_ci_hi < 0.
  bool negative_with_confidence() const { return slope_ci_hi < 0.0; }
};

/// Weighted fit with `resamples` bootstrap replicates drawn from Rng(seed).
DecayFit fit_decay(const std::vector<double>& eps_list, const std::vector<ProbabilityEstimate>& estimates,
                   int resamples = 200, std::uint64_t seed = 1);

/// mu^eps(O_eta^c) = P(dist(u, O) >= eta) per measure, then fit_decay.
DecayFit attracting_decay(const AttractorSet& set, double eta, const std::vector<EmpiricalMeasure>& measures);
/// Samples one measure per eps (seed stream i for the i-th eps) first.
DecayFit attracting_decay(const AttractorSet& set, double eta, const std::vector<double>& eps_list,
                          const FlowConfig& cfg, const SamplingSettings& settings);

struct TightnessRow {
  double R = 0.0;
  DecayFit fit;  // P(||u|| >= R) across eps
};

struct TightnessProfile {
  std::vector<TightnessRow> rows;
  /// Slopes non-increasing in R (each compared within its interval).
  bool monotone = true;
  std::vector<std::string> warnings;
};

TightnessProfile tightness_profile(const std::vector<double>& R_list, const std::vector<EmpiricalMeasure>& measures);

struct TubeResult {
  DecayFit fit;
  /// I_T of the reference trajectory.
  double reference_action = 0.0;
};

/// P(max over grid times ||S^eps(t) v - ref(t)|| < r) for each eps from n
/// independent runs; the reference must be recorded every integrator step
/// and start at v.  Run j for the i-th eps uses stream_seed(cfg.seed, i*n+j).
TubeResult tube_probability(const SpectralField& v, const Trajectory& reference, double r,
                            const std::vector<double>& eps_list, std::size_t n, const FlowConfig& cfg,
                            int threads = 1);

struct LowerBoundReport {
  bool refused = false;
  std::string reason;
  double quasipotential = 0.0;
  DecayFit fit;  // mu^eps(B_delta(target))
  /// -eps ln p at the smallest eps; this is the value compared with the bound.
  double exponent = 0.0;
  /// -eps ln p per eps (NaN where censored) and -slope of the fit.
  std::vector<double> exponents;
  double fitted_exponent = 0.0;
  double tolerance = 0.0;  // delta'
  bool passed = false;
};

/// Compares the Monte-Carlo exponent -eps ln mu^eps(B_delta(target)) at the
/// smallest eps with the quasipotential plus `tolerance`; requires a
/// singleton attractor.  When `quasipotential_value`
/// is unset it is computed with `schedule`.
LowerBoundReport lower_bound_check(const SpectralField& target, double delta, const AttractorSet& attractor,
                                   const std::vector<EmpiricalMeasure>& measures, const FlowConfig& cfg,
                                   double tolerance, std::optional<double> quasipotential_value = std::nullopt,
                                   const QuasipotentialSchedule* schedule = nullptr);

/// ||u|| and |u|_V per sample: columns chain,index,norm_h,norm_v.
void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m);
/// Columns eps,count,n,p_hat,ci_lo,ci_hi,censored.
void write_decay_csv(std::ostream& os, const DecayFit& fit);
std::string decay_fit_json(const DecayFit& fit);
/// Self-contained SVG of ln p against 1/eps with the fitted line.
void write_decay_svg(std::ostream& os, const DecayFit& fit, const std::string& title);

}  // namespace nsldp
