#include "nsldp/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nsldp/errors.hpp"
#include "nsldp/parallel.hpp"

namespace nsldp {

namespace {

constexpr double kZ95 = 1.959963984540054;

// Breadth-first distances from state 0 along edges with P > 0 (or P^T > 0).
std::vector<int> bfs_levels(const Eigen::MatrixXd& P, bool reverse) {
  const int n = static_cast<int>(P.rows());
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int i = queue[head];
    for (int j = 0; j < n; ++j) {
      const double w = reverse ? P(j, i) : P(i, j);
      if (w > 0.0 && level[j] < 0) {
        level[j] = level[i] + 1;
        queue.push_back(j);
      }
    }
  }
  return level;
}

void check_indicator(const Eigen::VectorXd& g, int n, const char* what) {
  if (g.size() != n) throw InvalidArgument(std::string(what) + " has the wrong length");
  for (int i = 0; i < n; ++i)
    if (g[i] != 0.0 && g[i] != 1.0) throw InvalidArgument(std::string(what) + " must be a 0/1 indicator");
}

MonteCarloEstimate summarize(const std::vector<double>& xs) {
  MonteCarloEstimate e;
  e.n = xs.size();
  if (xs.empty()) return e;
  const double n = static_cast<double>(xs.size());
  e.value = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.value) * (x - e.value);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  e.ci_lo = e.value - kZ95 * e.std_error;
  e.ci_hi = e.value + kZ95 * e.std_error;
  return e;
}

std::int64_t steps_of(double t, double dt) { return static_cast<std::int64_t>(std::llround(t / dt)); }

// Averages of psi over windows [tau + s, tau + s + delta] (steps after the
// window start) along one stochastic run from v.
std::vector<double> window_averages(const MarkovModel& model, const SpectralField& v, std::int64_t tau,
                                    std::int64_t delta, const std::vector<std::int64_t>& shifts,
                                    const Observable& psi, Rng& rng) {
  const std::int64_t last = tau + *std::max_element(shifts.begin(), shifts.end()) + delta;
  std::vector<double> trace(static_cast<std::size_t>(last + 1), 0.0);
  SpectralField u = v;
  const std::int64_t first = tau + *std::min_element(shifts.begin(), shifts.end()) + 1;
  for (std::int64_t n = 1; n <= last; ++n) {
    model.step(u, rng, n - 1);
    if (n >= first) trace[static_cast<std::size_t>(n)] = psi(u);
  }
  std::vector<double> out;
  for (auto s : shifts) {
    double sum = 0.0;
    for (std::int64_t n = tau + s + 1; n <= tau + s + delta; ++n) sum += trace[static_cast<std::size_t>(n)];
    out.push_back(sum / static_cast<double>(delta));
  }
  return out;
}

std::int64_t resolved_tau(const MarkovModel& model, const SpectralField& v) {
  const auto tau = model.stopping_steps(v);
  if (tau < 0) throw StoppingTimeout("stopping time did not resolve within the model horizon");
  return tau;
}

}  // namespace

// ---------------------------------------------------------------------------
// Finite chains

FiniteChain FiniteChain::make(Eigen::MatrixXd P, std::vector<int> tau) {
  const auto n = P.rows();
  if (n == 0 || P.cols() != n) throw InvalidArgument("transition matrix must be square and non-empty");
  if (static_cast<Eigen::Index>(tau.size()) != n) throw InvalidArgument("need one stopping time per state");
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(P(i, j) >= 0.0) || !std::isfinite(P(i, j)))
        throw InvalidArgument("transition probabilities must be finite and non-negative");
      sum += P(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("row " + std::to_string(i) + " does not sum to 1");
  }
  for (int t : tau)
    if (t < 0) throw InvalidArgument("stopping times must be non-negative");
  return FiniteChain{std::move(P), std::move(tau)};
}

bool FiniteChain::irreducible() const {
  for (bool reverse : {false, true}) {
    const auto level = bfs_levels(P, reverse);
    if (std::find(level.begin(), level.end(), -1) != level.end()) return false;
  }
  return true;
}

bool FiniteChain::aperiodic() const {
  const auto level = bfs_levels(P, false);
  int g = 0;
  for (int i = 0; i < size(); ++i)
    for (int j = 0; j < size(); ++j)
      if (P(i, j) > 0.0 && level[i] >= 0 && level[j] >= 0) g = std::gcd(g, std::abs(level[i] + 1 - level[j]));
  return g == 1;
}

FiniteChain read_chain(std::istream& is) {
  std::stringstream clean;
  std::string line;
  while (std::getline(is, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    clean << line << '\n';
  }
  int n = 0;
  if (!(clean >> n) || n <= 0) throw InvalidArgument("chain file: expected a positive state count");
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(clean >> P(i, j))) throw InvalidArgument("chain file: transition matrix is incomplete");
  std::vector<int> tau(n);
  for (int i = 0; i < n; ++i)
    if (!(clean >> tau[i])) throw InvalidArgument("chain file: expected " + std::to_string(n) + " stopping times");
  std::string extra;
  if (clean >> extra) throw InvalidArgument("chain file: trailing content '" + extra + "'");
  return FiniteChain::make(std::move(P), std::move(tau));
}

FiniteChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open chain file " + path);
  return read_chain(in);
}

void write_chain(std::ostream& os, const FiniteChain& c) {
  os << c.size() << '\n' << std::setprecision(17);
  for (int i = 0; i < c.size(); ++i) {
    for (int j = 0; j < c.size(); ++j) os << (j ? " " : "") << c.P(i, j);
    os << '\n';
  }
  for (int i = 0; i < c.size(); ++i) os << (i ? " " : "") << c.tau[i];
  os << '\n';
}

FiniteChain random_chain(int n, int max_tau, Rng& rng) {
  if (n <= 0 || max_tau < 0) throw InvalidArgument("random chain needs n > 0 and max_tau >= 0");
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      // sparse-ish rows; the cycle i -> i+1 and the self-loop keep the chain
      // irreducible and aperiodic
      const bool edge = j == i || j == (i + 1) % n || rng.uniform() < 0.5;
      P(i, j) = edge ? 0.05 + rng.uniform() : 0.0;
      sum += P(i, j);
    }
    P.row(i) /= sum;
    P(i, i) += 1.0 - P.row(i).sum();
  }
  std::vector<int> tau(n);
  for (auto& t : tau) t = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_tau + 1));
  return FiniteChain::make(std::move(P), std::move(tau));
}

Eigen::VectorXd chain_stationary(const FiniteChain& c) {
  if (!c.irreducible()) throw InvalidArgument("chain is reducible; the stationary distribution is not unique");
  if (!c.aperiodic()) throw InvalidArgument("chain is periodic");
  const int n = c.size();
  // (P^T - I) pi = 0 with the last equation replaced by sum pi = 1
  Eigen::MatrixXd A = c.P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd pi = lu.solve(rhs);
  for (int it = 0; it < 3; ++it) {
    const double res = (c.P.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
    if (res <= 1e-13) break;
    pi += lu.solve(rhs - A * pi);
  }
  const double res = (c.P.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
  if (res > 1e-12) throw NumericalBlowup("stationary solve residual " + std::to_string(res), 0);
  return pi;
}

Eigen::VectorXd chain_semigroup(const FiniteChain& c, const Eigen::VectorXd& psi, int t) {
  if (psi.size() != c.size()) throw InvalidArgument("observable has the wrong length");
  if (t < 0) throw InvalidArgument("semigroup time must be non-negative");
  Eigen::VectorXd out = psi;
  for (int i = 0; i < t; ++i) out = c.P * out;
  return out;
}

Eigen::VectorXd r_delta(const FiniteChain& c, int delta, const Eigen::VectorXd& psi) {
  if (delta <= 0) throw InvalidArgument("delta must be positive");
  if (psi.size() != c.size()) throw InvalidArgument("observable has the wrong length");
  const int t_max = *std::max_element(c.tau.begin(), c.tau.end()) + delta;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c.size());
  Eigen::VectorXd power = psi;  // P^t psi
  for (int t = 1; t <= t_max; ++t) {
    power = c.P * power;
    for (int v = 0; v < c.size(); ++v)
      if (t > c.tau[v] && t <= c.tau[v] + delta) out[v] += power[v];
  }
  return out / static_cast<double>(delta);
}

double r_delta(const FiniteChain& c, int v, int delta, const Eigen::VectorXd& psi) {
  if (v < 0 || v >= c.size()) throw InvalidArgument("state index out of range");
  return r_delta(c, delta, psi)[v];
}

double lambda_functional(const FiniteChain& c, const Eigen::VectorXd& mu, int delta, const Eigen::VectorXd& psi) {
  if (mu.size() != c.size()) throw InvalidArgument("distribution has the wrong length");
  return mu.dot(r_delta(c, delta, psi));
}

SandwichReport sandwich_check(const FiniteChain& c, const Eigen::VectorXd& mu, int delta,
                              const Eigen::VectorXd& interior, const Eigen::VectorXd& closure, double tolerance) {
  check_indicator(interior, c.size(), "interior");
  check_indicator(closure, c.size(), "closure");
  for (int i = 0; i < c.size(); ++i)
    if (interior[i] > closure[i]) throw InvalidArgument("interior is not contained in the closure");
  SandwichReport r;
  r.tolerance = tolerance;
  r.mu_interior = mu.dot(interior);
  r.mu_closure = mu.dot(closure);
  r.lambda_interior = lambda_functional(c, mu, delta, interior);
  r.lambda_closure = lambda_functional(c, mu, delta, closure);
  r.lower = r.mu_interior <= r.lambda_interior + tolerance;
  r.middle = r.lambda_interior <= r.lambda_closure + tolerance;
  r.upper = r.lambda_closure <= r.mu_closure + tolerance;
  return r;
}

ShiftReport shift_invariance_check(const FiniteChain& c, const Eigen::VectorXd& mu, int delta,
                                   const Eigen::VectorXd& psi, const std::vector<int>& shifts, double tolerance) {
  ShiftReport r;
  r.tolerance = tolerance;
  r.base = lambda_functional(c, mu, delta, psi);
  for (int s : shifts) {
    const double v = lambda_functional(c, mu, delta, chain_semigroup(c, psi, s));
    r.shifts.push_back(s);
    r.values.push_back(v);
    r.max_deviation = std::max(r.max_deviation, std::abs(v - r.base));
  }
  r.passed = r.max_deviation <= tolerance;
  return r;
}

MixingReport b0_mixing_check(const FiniteChain& c, const std::vector<Eigen::VectorXd>& psi_list,
                             const std::vector<int>& t_list) {
  const auto pi = chain_stationary(c);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(c.P);
  const Eigen::VectorXcd z = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::MatrixXcd Vinv = V.inverse();
  // index of the eigenvalue 1
  Eigen::Index one = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i)
    if (std::abs(z[i] - 1.0) < std::abs(z[one] - 1.0)) one = i;

  MixingReport rep;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (i != one) rep.second_eigenvalue = std::max(rep.second_eigenvalue, std::abs(z[i]));

  for (std::size_t ip = 0; ip < psi_list.size(); ++ip) {
    const auto& psi = psi_list[ip];
    if (psi.size() != c.size()) throw InvalidArgument("observable has the wrong length");
    const Eigen::VectorXcd coef = Vinv * psi.cast<std::complex<double>>();
    double C = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (i != one) C += std::abs(coef[i]) * V.col(i).cwiseAbs().maxCoeff();
    const double mean = pi.dot(psi);
    const double sup_psi = psi.cwiseAbs().maxCoeff();
    std::vector<MixingRow> rows;
    for (int t : t_list) {
      const auto pt = chain_semigroup(c, psi, t);
      MixingRow row;
      row.t = t;
      row.deviation = (pt.array() - mean).abs().maxCoeff();
      row.rate_bound = C * std::pow(rep.second_eigenvalue, t);
      if (pt.cwiseAbs().maxCoeff() > sup_psi * (1.0 + 1e-12) + 1e-15) rep.bounded = false;
      if (row.deviation > row.rate_bound * (1.0 + 1e-8) + 1e-12) {
        rep.within_rate = false;
        rep.diagnostics.push_back("psi " + std::to_string(ip) + " t=" + std::to_string(t) +
                                  ": deviation above the spectral rate");
      }
      if (!rows.empty() && row.deviation > rows.back().deviation + 1e-14) {
        rep.decreasing = false;
        rep.diagnostics.push_back("psi " + std::to_string(ip) + " t=" + std::to_string(t) +
                                  ": deviation increased");
      }
      rows.push_back(row);
    }
    rep.rows.push_back(std::move(rows));
  }
  return rep;
}

void write_sandwich_report(std::ostream& os, const SandwichReport& r) {
  os << std::setprecision(17);
  os << "mu_interior = " << r.mu_interior << '\n'
     << "lambda_interior = " << r.lambda_interior << '\n'
     << "lambda_closure = " << r.lambda_closure << '\n'
     << "mu_closure = " << r.mu_closure << '\n'
     << "tolerance = " << r.tolerance << '\n'
     << "mu(interior) <= lambda(interior): " << (r.lower ? "pass" : "FAIL") << '\n'
     << "lambda(interior) <= lambda(closure): " << (r.middle ? "pass" : "FAIL") << '\n'
     << "lambda(closure) <= mu(closure): " << (r.upper ? "pass" : "FAIL") << '\n';
}

void write_shift_report(std::ostream& os, const ShiftReport& r) {
  os << std::setprecision(17) << "lambda(psi) = " << r.base << '\n';
  for (std::size_t i = 0; i < r.shifts.size(); ++i) {
    const double dev = std::abs(r.values[i] - r.base);
    os << "lambda(P_" << r.shifts[i] << " psi) = " << r.values[i] << "  deviation " << dev << ": "
       << (dev <= r.tolerance ? "pass" : "FAIL") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Flow adapter

FlowModel::FlowModel(const FlowConfig& cfg, AttractorSet set, double eta, double t_max, double gauge_radius)
    : cfg_(cfg), set_(std::move(set)), eta_(eta), t_max_(t_max), gauge_radius_(gauge_radius), stepper_(cfg) {
  if (!(eta > 0.0) || !(t_max > 0.0) || !(gauge_radius > 0.0))
    throw InvalidArgument("flow model needs eta, t_max and gauge radius positive");
  if (set_.points.empty()) throw InvalidArgument("flow model needs a non-empty attractor set");
}

void FlowModel::step(SpectralField& u, Rng& rng, std::int64_t step_index) const {
  stepper_.advance(u, nullptr, cfg_.epsilon > 0.0 ? &rng : nullptr, step_index);
}

std::int64_t FlowModel::stopping_steps(const SpectralField& v) const {
  const double t = deterministic_hitting_time(v, set_, eta_, cfg_, t_max_);
  return t == kNotHit ? -1 : steps_of(t, cfg_.dt);
}

bool FlowModel::in_bounded_set(const SpectralField& u) const { return norm_h(u) <= gauge_radius_; }

MonteCarloEstimate r_delta_mc(const MarkovModel& model, const SpectralField& v, double delta, const Observable& psi,
                              std::size_t n, std::uint64_t seed, double shift, int threads) {
  if (!(delta > 0.0) || shift < 0.0 || n == 0) throw InvalidArgument("r_delta needs delta > 0, shift >= 0, n > 0");
  const auto nd = std::max<std::int64_t>(1, steps_of(delta, model.dt()));
  const auto ns = steps_of(shift, model.dt());
  const auto tau = resolved_tau(model, v);
  const auto xs = parallel_map(n, threads, [&](std::size_t j) {
    Rng rng(stream_seed(seed, j));
    return window_averages(model, v, tau, nd, {ns}, psi, rng)[0];
  });
  return summarize(xs);
}

namespace {

// Per sample window averages for every shift, common random numbers.
std::vector<std::vector<double>> lambda_windows(const MarkovModel& model, const std::vector<SpectralField>& samples,
                                                double delta, const Observable& psi,
                                                const std::vector<double>& shifts, std::uint64_t seed, int threads,
                                                std::vector<std::int64_t> taus = {}) {
  if (!(delta > 0.0) || samples.empty()) throw InvalidArgument("lambda needs delta > 0 and samples");
  const auto nd = std::max<std::int64_t>(1, steps_of(delta, model.dt()));
  std::vector<std::int64_t> ns;
  for (double s : shifts) {
    if (s < 0.0) throw InvalidArgument("shifts must be non-negative");
    ns.push_back(steps_of(s, model.dt()));
  }
  if (taus.empty()) {
    taus.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) taus[i] = resolved_tau(model, samples[i]);
  }
  return parallel_map(samples.size(), threads, [&](std::size_t i) {
    Rng rng(stream_seed(seed, i));
    return window_averages(model, samples[i], taus[i], nd, ns, psi, rng);
  });
}

}  // namespace

MonteCarloEstimate lambda_mc(const MarkovModel& model, const std::vector<SpectralField>& mu_samples, double delta,
                             const Observable& psi, std::uint64_t seed, double shift, int threads) {
  const auto w = lambda_windows(model, mu_samples, delta, psi, {shift}, seed, threads);
  std::vector<double> xs;
  for (const auto& r : w) xs.push_back(r[0]);
  return summarize(xs);
}

ShiftEstimate shift_invariance_mc(const MarkovModel& model, const std::vector<SpectralField>& mu_samples,
                                  double delta, const Observable& psi, const std::vector<double>& shifts,
                                  std::uint64_t seed, int threads) {
  std::vector<double> all{0.0};
  all.insert(all.end(), shifts.begin(), shifts.end());
  const auto w = lambda_windows(model, mu_samples, delta, psi, all, seed, threads);
  ShiftEstimate out;
  out.shifts = shifts;
  std::vector<double> base;
  for (const auto& r : w) base.push_back(r[0]);
  out.base = summarize(base);
  for (std::size_t k = 0; k < shifts.size(); ++k) {
    std::vector<double> xs, diff;
    for (const auto& r : w) {
      xs.push_back(r[k + 1]);
      diff.push_back(r[k + 1] - r[0]);
    }
    out.values.push_back(summarize(xs));
    const auto d = summarize(diff);
    if (std::abs(d.value) > kZ95 * d.std_error + 1e-12) out.agree = false;
  }
  return out;
}

MixingEstimate b0_mixing_mc(const MarkovModel& model, const Observable& psi, double psi_mean, double psi_sup,
                            const std::vector<SpectralField>& starts, const std::vector<double>& times,
                            std::size_t n, std::uint64_t seed, int threads) {
  if (starts.empty() || times.empty() || n < 2) throw InvalidArgument("mixing check needs starts, times and n >= 2");
  std::vector<std::int64_t> steps;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1])))
      throw InvalidArgument("mixing times must be non-negative and increasing");
    steps.push_back(steps_of(times[i], model.dt()));
  }
  // values[start][run][time]
  std::vector<std::vector<std::vector<double>>> values(starts.size());
  for (std::size_t a = 0; a < starts.size(); ++a) {
    values[a] = parallel_map(n, threads, [&](std::size_t j) {
      Rng rng(stream_seed(seed, j));
      SpectralField u = starts[a];
      std::vector<double> row;
      std::int64_t at = 0;
      for (auto s : steps) {
        for (; at < s; ++at) model.step(u, rng, at);
        row.push_back(psi(u));
      }
      return row;
    });
  }
  MixingEstimate est;
  est.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    double best = -1.0, best_se = 0.0;
    for (std::size_t a = 0; a < starts.size(); ++a) {
      std::vector<double> xs;
      for (const auto& r : values[a]) xs.push_back(r[k]);
      const auto m = summarize(xs);
      if (std::abs(m.value) > psi_sup * (1.0 + 1e-12)) est.bounded = false;
      const double dev = std::abs(m.value - psi_mean);
      if (dev > best) best = dev, best_se = m.std_error;
    }
    if (!est.sup_deviation.empty() && best > est.sup_deviation.back()) est.decreasing = false;
    est.sup_deviation.push_back(best);
    est.std_error.push_back(best_se);
  }
  double mx = 0, my = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (est.sup_deviation[k] > 0.0) mx += times[k], my += std::log(est.sup_deviation[k]), ++used;
  if (used >= 2) {
    mx /= static_cast<double>(used);
    my /= static_cast<double>(used);
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < times.size(); ++k)
      if (est.sup_deviation[k] > 0.0) {
        sxy += (times[k] - mx) * (std::log(est.sup_deviation[k]) - my);
        sxx += (times[k] - mx) * (times[k] - mx);
      }
    est.decay_rate = -sxy / sxx;
  }
  return est;
}

GaugeReport condition_a_gauge(const MarkovModel& model, const std::vector<SpectralField>& starts, double T,
                              std::size_t runs_per_start, double eta, std::uint64_t seed, int threads) {
  if (starts.empty() || runs_per_start == 0 || !(T > 0.0) || !(eta > 0.0))
    throw InvalidArgument("gauge needs starts, runs, T > 0 and eta > 0");
  const auto n_steps = steps_of(T, model.dt());
  const std::size_t total = starts.size() * runs_per_start;
  const auto left = parallel_map(total, threads, [&](std::size_t j) {
    Rng rng(stream_seed(seed, j));
    SpectralField u = starts[j / runs_per_start];
    if (!model.in_bounded_set(u)) return 1;
    for (std::int64_t n = 0; n < n_steps; ++n) {
      model.step(u, rng, n);
      if (!model.in_bounded_set(u)) return 1;
    }
    return 0;
  });
  GaugeReport rep;
  rep.eta = eta;
  rep.left = binomial_estimate(std::accumulate(left.begin(), left.end(), std::int64_t{0}),
                               static_cast<std::int64_t>(total));
  rep.passed = rep.left.ci_hi < eta;
  return rep;
}

DeltaSelection select_delta(const FlowModel& model, const std::vector<SpectralField>& probes, double delta_max,
                            int threads) {
  if (!(delta_max > 0.0)) throw InvalidArgument("delta_max must be positive");
  DeltaSelection sel;
  sel.probes = probes.size();
  if (probes.empty()) {
    sel.reason = "no probes";
    return sel;
  }
  FlowConfig det = model.config();
  det.epsilon = 0.0;
  const ExpEuler stepper(det);
  const double dt = det.dt;
  const auto n_max = std::max<std::int64_t>(1, steps_of(delta_max, dt));
  const double radius = 0.5 * model.eta();
  // steps the deterministic flow stays in the closed eta/2 neighbourhood
  // after tau, capped at n_max; -1 for an unresolved tau
  const auto stay = parallel_map(probes.size(), threads, [&](std::size_t i) -> std::int64_t {
    const auto tau = model.stopping_steps(probes[i]);
    if (tau < 0) return -1;
    SpectralField u = probes[i];
    std::int64_t n = 0;
    for (; n < tau; ++n) stepper.advance(u, nullptr, nullptr, n);
    for (std::int64_t k = 0; k < n_max; ++k) {
      stepper.advance(u, nullptr, nullptr, n + k);
      if (model.attractor().distance_to(u) > radius) return k;
    }
    return n_max;
  });
  std::int64_t best = n_max;
  std::size_t used = 0;
  for (auto s : stay) {
    if (s < 0) {
      ++sel.timeouts;
      continue;
    }
    ++used;
    best = std::min(best, s);
  }
  if (used == 0) {
    sel.reason = "no probe resolved its stopping time";
    return sel;
  }
  if (best == 0) {
    sel.reason = "a probe leaves the eta/2 neighbourhood immediately after its stopping time";
    return sel;
  }
  sel.selected = true;
  sel.delta = static_cast<double>(best) * dt;
  return sel;
}

LambdaReport nse_lambda_estimator(const FlowModel& model, const EmpiricalMeasure& measure,
                                  const LambdaSettings& settings) {
  if (measure.samples.empty()) throw InvalidArgument("empty measure");
  if (settings.outer_samples == 0) throw InvalidArgument("need at least one outer sample");
  const auto& set = model.attractor();
  const double eta = model.eta();
  LambdaReport rep;

  // evenly spaced subsample, which also thins the chain correlation
  std::vector<SpectralField> outer;
  const std::size_t n_out = std::min(settings.outer_samples, measure.samples.size());
  for (std::size_t i = 0; i < n_out; ++i) outer.push_back(measure.samples[i * measure.samples.size() / n_out]);

  if (settings.delta > 0.0) {
    rep.delta.selected = true;
    rep.delta.delta = settings.delta;
    rep.delta.probes = 0;
  } else {
    rep.delta = select_delta(model, outer, settings.delta_max, settings.threads);
  }
  const Predicate outside = [&](const SpectralField& u) { return set.distance_to(u) > eta; };
  rep.mu = event_probability(measure, outside);
  if (!rep.delta.selected) {
    rep.reason = "window selection failed: " + rep.delta.reason;
    return rep;
  }
  const auto taus = parallel_map(outer.size(), settings.threads,
                                 [&](std::size_t i) { return model.stopping_steps(outer[i]); });
  for (auto t : taus)
    if (t < 0) ++rep.timeouts;
  if (rep.timeouts > 0)
    throw StoppingTimeout(std::to_string(rep.timeouts) + " of " + std::to_string(outer.size()) +
                          " outer samples did not reach the eta/4 neighbourhood");
  const Observable indicator = [&](const SpectralField& u) { return outside(u) ? 1.0 : 0.0; };
  const auto w = lambda_windows(model, outer, rep.delta.delta, indicator, {0.0}, settings.seed, settings.threads, taus);
  std::vector<double> xs;
  for (const auto& r : w) xs.push_back(r[0]);
  rep.lambda = summarize(xs);
  const double half = kZ95 * std::hypot(rep.mu.std_error, rep.lambda.std_error);
  rep.ordering = rep.mu.p <= rep.lambda.value + half;
  return rep;
}

}  // namespace nsldp
