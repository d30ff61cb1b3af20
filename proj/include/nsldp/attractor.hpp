#pragma once

// Point-cloud approximations of the omega-limit set and the global attractor
// of the deterministic flow, and hitting times of their neighbourhoods.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "nsldp/flow.hpp"

namespace nsldp {

enum class AttractorKind { OmegaLimit, Global };

std::string to_string(AttractorKind kind);
AttractorKind attractor_kind_from_string(const std::string& s);

struct AttractorOrigin {
  std::size_t ensemble_size = 0;
  double transient_time = 0.0;
  double collect_time = 0.0;
  double sample_dt = 0.0;
  /// Largest V-norm seen along the collected part of the trajectories.
  double v_norm_bound = 0.0;
};

struct AttractorSet {
  std::vector<SpectralField> points;
  AttractorKind kind = AttractorKind::OmegaLimit;
  double cluster_tol = 0.0;
  AttractorOrigin origin;

  static AttractorSet singleton(const SpectralField& point, AttractorKind kind = AttractorKind::OmegaLimit);

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
  bool is_singleton() const noexcept { return points.size() == 1; }
  const BasisPtr& basis() const { return points.front().basis(); }

  /// H-distance from u to the nearest point.
  double distance_to(const SpectralField& u) const;
  std::size_t nearest(const SpectralField& u) const;
};

/// Integrates every ensemble member (in parallel), discards [0, T_transient],
/// samples each `sample_dt` over the collection window and merges the samples
/// greedily in (member, time) order: a sample is kept iff it is at least
/// cluster_tol away from every point kept so far.
AttractorSet approximate_omega_set(const std::vector<SpectralField>& ensemble, double transient_time,
                                   double collect_time, double sample_dt, double cluster_tol, const FlowConfig& cfg,
                                   int threads = 1);

/// Adds extra points (e.g. endpoints of low-action connecting paths) under the
/// same merge rule and marks the set as a global-attractor approximation.
AttractorSet augment_global(const AttractorSet& omega, const std::vector<SpectralField>& extra);

/// max over points p of dist(S(t) p, set): the near-invariance defect.
double invariance_defect(const AttractorSet& set, const FlowConfig& cfg, double t = 1.0);

inline constexpr double kNotHit = std::numeric_limits<double>::infinity();

/// First grid time with dist(S(t) v, set) < eta / 4, or kNotHit if that does
/// not happen by t_max.
double deterministic_hitting_time(const SpectralField& v, const AttractorSet& set, double eta, const FlowConfig& cfg,
                                  double t_max);

struct HittingSweep {
  std::vector<SpectralField> starts;
  std::vector<double> times;
  double sup = 0.0;  // kNotHit if any start did not hit
};

/// Hitting times from `n` points drawn uniformly in the H-ball B_R.
HittingSweep hitting_time_sweep(const AttractorSet& set, double eta, double R, std::size_t n, std::uint64_t seed,
                                const FlowConfig& cfg, double t_max, int threads = 1);

/// Binomial proportion with a 95% interval.  Zero (or full) counts are
/// censored: the point estimate is kept but only the one-sided bound is
/// informative.
struct BinomialEstimate {
  std::int64_t count = 0;
  std::int64_t n = 0;
  double p = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  bool censored = false;
};

/// Wilson score interval; for count == 0 the upper end is the exact one-sided
/// bound 1 - alpha^{1/n} (and symmetrically for count == n).
BinomialEstimate binomial_estimate(std::int64_t count, std::int64_t n, double alpha = 0.05);

struct HittingRow {
  double epsilon = 0.0;
  double s = 0.0;
  BinomialEstimate estimate;
};

struct HittingTrend {
  double epsilon = 0.0;
  /// Least-squares slope of eps ln P over the uncensored s values (NaN with
  /// fewer than two).
  double slope = 0.0;
  std::size_t points = 0;
};

struct HittingTable {
  std::vector<HittingRow> rows;  // eps-major, s-minor
  std::vector<HittingTrend> trends;
  std::vector<std::string> warnings;

  const HittingRow& at(std::size_t eps_index, std::size_t s_index) const;
  std::size_t s_count = 0;
};

/// Monte-Carlo estimate of P(tau^eps_eta(v) >= s), where tau^eps_eta is the
/// first grid time at which the stochastic trajectory from v is within eta of
/// the set (closed neighbourhood).  Sample j for the i-th epsilon uses the
/// stream stream_seed(cfg.seed, i * n_samples + j).
HittingTable stochastic_hitting_tail(const SpectralField& v, const AttractorSet& set, double eta,
                                     const std::vector<double>& eps_list, const std::vector<double>& s_list,
                                     std::size_t n_samples, const FlowConfig& cfg, int threads = 1);

/// Columns eps,s,count,n,p_hat,ci_lo,ci_hi,censored.
void write_hitting_csv(std::ostream& os, const HittingTable& table);

/// Directory of point_NNN.csv field files plus manifest.json.
void save_attractor(const std::string& dir, const AttractorSet& set);
AttractorSet load_attractor(const std::string& dir);

}  // namespace nsldp
