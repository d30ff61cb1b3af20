#include "nsldp/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "nsldp/errors.hpp"
#include "nsldp/parallel.hpp"

namespace nsldp {

namespace {

constexpr double kZ95 = 1.959963984540054;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed of the i-th epsilon in a sweep; chains add their index in the low bits.
std::uint64_t eps_seed(std::uint64_t base, std::size_t i) {
  return stream_seed(base, static_cast<std::uint64_t>(i + 1) << 32);
}

struct BatchStats {
  double mean = 0.0;
  double std_error = 0.0;
  double iid_variance = 0.0;
  std::size_t batches = 0;
};

// Batch means within each chain, pooled over chains.
BatchStats batch_means(const std::vector<double>& x, const std::vector<int>& chain, int batches_per_chain) {
  BatchStats s;
  const std::size_t n = x.size();
  if (n == 0) return s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.iid_variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;

  std::vector<double> means;
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && chain[end] == chain[begin]) ++end;
    const std::size_t len = end - begin;
    const std::size_t bsize = len / static_cast<std::size_t>(std::max(1, batches_per_chain));
    if (bsize >= 1) {
      for (int b = 0; b < batches_per_chain; ++b) {
        const std::size_t lo = begin + static_cast<std::size_t>(b) * bsize;
        double m = 0.0;
        for (std::size_t i = lo; i < lo + bsize; ++i) m += x[i];
        means.push_back(m / static_cast<double>(bsize));
      }
    }
    begin = end;
  }
  s.batches = means.size();
  if (means.size() >= 2) {
    const double mm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    double v = 0.0;
    for (double m : means) v += (m - mm) * (m - mm);
    v /= static_cast<double>(means.size() - 1);
    s.std_error = std::sqrt(v / static_cast<double>(means.size()));
  }
  return s;
}

ProbabilityEstimate from_binomial(std::int64_t count, std::int64_t n) {
  const auto b = binomial_estimate(count, n);
  ProbabilityEstimate e;
  e.p = b.p;
  e.ci_lo = b.ci_lo;
  e.ci_hi = b.ci_hi;
  e.count = count;
  e.n = n;
  e.effective_n = static_cast<double>(n);
  e.std_error = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(n));
  e.censored = count == 0;
  return e;
}

}  // namespace

double default_burn_in(double eps, double cap) {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  return std::min(cap, 10.0 * (1.0 + 1.0 / eps));
}

EmpiricalMeasure sample_stationary(double eps, const FlowConfig& cfg, const SamplingSettings& s) {
  if (!(eps > 0.0)) throw InvalidArgument("sample_stationary needs eps > 0");
  if (!(s.burn_in >= 0.0) || !(s.burn_in < s.horizon))
    throw InvalidArgument("burn-in (" + std::to_string(s.burn_in) + ") must be below the horizon (" +
                          std::to_string(s.horizon) + ")");
  if (s.stride < 1) throw InvalidArgument("stride must be at least one step");
  if (s.chains < 1) throw InvalidArgument("need at least one chain");
  FlowConfig c = cfg;
  c.epsilon = eps;
  c.validate();
  const ExpEuler stepper(c);
  const auto total = std::llround(s.horizon / c.dt);
  const auto burn = std::llround(s.burn_in / c.dt);
  const SpectralField start = s.start ? *s.start : SpectralField(c.basis());
  start.require_same_basis(c.forcing, "sample_stationary");

  auto chains = parallel_map(static_cast<std::size_t>(s.chains), s.threads, [&](std::size_t ci) {
    Rng rng(stream_seed(c.seed, ci));
    std::vector<SpectralField> out;
    SpectralField u = start;
    for (std::int64_t n = 1; n <= total; ++n) {
      stepper.advance(u, nullptr, &rng, n - 1);
      if (n >= burn && (n - burn) % s.stride == 0) out.push_back(u);
    }
    return out;
  });

  EmpiricalMeasure m;
  m.meta = {eps, c.dt, s.burn_in, s.horizon, s.stride, c.seed, s.chains};
  for (std::size_t ci = 0; ci < chains.size(); ++ci)
    for (auto& u : chains[ci]) {
      m.samples.push_back(std::move(u));
      m.chain.push_back(static_cast<int>(ci));
    }
  if (m.samples.empty()) throw InvalidArgument("no samples collected (stride longer than the sampling window)");
  return m;
}

ProbabilityEstimate event_probability(const EmpiricalMeasure& m, const Predicate& pred, int batches) {
  if (m.samples.empty()) throw InvalidArgument("empty measure");
  const std::size_t n = m.samples.size();
  std::vector<double> ind(n);
  std::int64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool hit = pred(m.samples[i]);
    ind[i] = hit ? 1.0 : 0.0;
    count += hit ? 1 : 0;
  }
  ProbabilityEstimate e;
  e.count = count;
  e.n = static_cast<std::int64_t>(n);
  e.p = static_cast<double>(count) / static_cast<double>(n);
  const auto bs = batch_means(ind, m.chain, batches);
  e.std_error = bs.std_error;

  if (count == 0 || count == e.n) {
    // the indicator is constant; borrow the effective sample size of ||u||
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = norm_h(m.samples[i]);
    const auto ns = batch_means(norms, m.chain, batches);
    e.effective_n = ns.std_error > 0.0 ? std::min<double>(static_cast<double>(n), ns.iid_variance / (ns.std_error * ns.std_error))
                                       : static_cast<double>(n);
    e.censored = count == 0;
    const double bound = std::pow(0.05, 1.0 / std::max(1.0, e.effective_n));
    if (count == 0) {
      e.ci_lo = 0.0;
      e.ci_hi = 1.0 - bound;
    } else {
      e.ci_lo = bound;
      e.ci_hi = 1.0;
    }
    return e;
  }
  e.effective_n = bs.std_error > 0.0 ? e.p * (1.0 - e.p) / (bs.std_error * bs.std_error) : static_cast<double>(n);
  e.ci_lo = std::max(0.0, e.p - kZ95 * bs.std_error);
  e.ci_hi = std::min(1.0, e.p + kZ95 * bs.std_error);
  return e;
}

StationarityReport stationarity_check(const EmpiricalMeasure& m, double alpha) {
  const std::size_t n = m.samples.size();
  if (n < 40) throw InvalidArgument("stationarity check needs at least 40 samples");
  std::vector<double> a, b;
  std::vector<int> ca, cb;
  // halves per chain so that both halves see every chain
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && m.chain[end] == m.chain[begin]) ++end;
    const std::size_t mid = begin + (end - begin) / 2;
    for (std::size_t i = begin; i < end; ++i) {
      (i < mid ? a : b).push_back(norm_h(m.samples[i]));
      (i < mid ? ca : cb).push_back(m.chain[i]);
    }
    begin = end;
  }
  const auto sa = batch_means(a, ca, 10), sb = batch_means(b, cb, 10);
  StationarityReport r;
  r.mean_first = sa.mean;
  r.mean_second = sb.mean;
  const double se = std::hypot(sa.std_error, sb.std_error);
  r.z = se > 0.0 ? (sa.mean - sb.mean) / se : 0.0;
  // two-sided normal quantile by bisection on erfc
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > alpha ? lo : hi) = mid;
  }
  r.passed = std::abs(r.z) <= lo;
  return r;
}

DecayFit fit_decay(const std::vector<double>& eps_list, const std::vector<ProbabilityEstimate>& estimates,
                   int resamples, std::uint64_t seed) {
  if (eps_list.size() != estimates.size()) throw InvalidArgument("one estimate per epsilon expected");
  if (eps_list.size() < 3) throw InvalidArgument("a decay slope needs at least 3 epsilon values");
  DecayFit f;
  f.eps_list = eps_list;
  f.estimates = estimates;

  std::vector<double> x, y, w, sd;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const auto& e = estimates[i];
    if (e.count == 0) {
      f.warnings.push_back("eps=" + std::to_string(eps_list[i]) + ": zero count, used as an upper bound only");
      continue;
    }
    const double n = static_cast<double>(e.n);
    const double var = (e.std_error * e.std_error + 1.0 / (n * n)) / (e.p * e.p);
    x.push_back(1.0 / eps_list[i]);
    y.push_back(std::log(e.p));
    w.push_back(1.0 / var);
    sd.push_back(std::sqrt(var));
  }
  f.points_used = x.size();

  if (x.size() < 2) {
    // every censored point gives eps ln p <= eps ln ci_hi
    f.censored_bound = true;
    double bound = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eps_list.size(); ++i)
      bound = std::max(bound, eps_list[i] * std::log(std::max(estimates[i].ci_hi, 1e-300)));
    f.slope = bound;
    f.intercept = kNaN;
    f.slope_ci_lo = -std::numeric_limits<double>::infinity();
    f.slope_ci_hi = bound;
    f.warnings.push_back("fewer than two non-zero estimates: slope replaced by a certified upper bound");
    return f;
  }

  auto wls = [&](const std::vector<double>& yy, double& slope, double& icpt) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sw += w[i], sx += w[i] * x[i], sy += w[i] * yy[i];
    const double mx = sx / sw, my = sy / sw;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += w[i] * (x[i] - mx) * (yy[i] - my);
      sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    }
    slope = sxx > 0.0 ? sxy / sxx : 0.0;
    icpt = my - slope * mx;
  };
  wls(y, f.slope, f.intercept);

  // standardised residuals, inflated for the two fitted parameters
  std::vector<double> res;
  const double dof = static_cast<double>(x.size()) - 2.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - (f.intercept + f.slope * x[i])) * std::sqrt(w[i]);
    res.push_back(dof > 0.0 ? r * std::sqrt(static_cast<double>(x.size()) / dof) : 0.0);
  }
  Rng rng(seed);
  std::vector<double> slopes;
  std::vector<double> yb(x.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = res[static_cast<std::size_t>(rng.next_u64() % res.size())];
      yb[i] = f.intercept + f.slope * x[i] + r * sd[i] + rng.normal() * sd[i];
    }
    double s = 0, c = 0;
    wls(yb, s, c);
    slopes.push_back(s);
  }
  std::sort(slopes.begin(), slopes.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(slopes.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < slopes.size() ? slopes[i] * (1 - frac) + slopes[i + 1] * frac : slopes[i];
  };
  f.slope_ci_lo = quantile(0.025);
  f.slope_ci_hi = quantile(0.975);
  return f;
}

DecayFit attracting_decay(const AttractorSet& set, double eta, const std::vector<EmpiricalMeasure>& measures) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  std::vector<double> eps;
  std::vector<ProbabilityEstimate> est;
  for (const auto& m : measures) {
    eps.push_back(m.meta.epsilon);
    est.push_back(event_probability(m, [&](const SpectralField& u) { return set.distance_to(u) >= eta; }));
  }
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] < eps[i - 1])) throw InvalidArgument("eps_list must be decreasing");
  return fit_decay(eps, est);
}

DecayFit attracting_decay(const AttractorSet& set, double eta, const std::vector<double>& eps_list,
                          const FlowConfig& cfg, const SamplingSettings& settings) {
  std::vector<EmpiricalMeasure> ms;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    FlowConfig c = cfg;
    c.seed = eps_seed(cfg.seed, i);
    ms.push_back(sample_stationary(eps_list[i], c, settings));
  }
  return attracting_decay(set, eta, ms);
}

TightnessProfile tightness_profile(const std::vector<double>& R_list, const std::vector<EmpiricalMeasure>& measures) {
  for (std::size_t i = 1; i < R_list.size(); ++i)
    if (!(R_list[i] > R_list[i - 1])) throw InvalidArgument("R_list must be increasing");
  TightnessProfile prof;
  std::vector<double> eps;
  for (const auto& m : measures) eps.push_back(m.meta.epsilon);
  for (double R : R_list) {
    std::vector<ProbabilityEstimate> est;
    for (const auto& m : measures)
      est.push_back(event_probability(m, [&](const SpectralField& u) { return norm_h(u) >= R; }));
    TightnessRow row{R, fit_decay(eps, est)};
    for (const auto& w : row.fit.warnings) prof.warnings.push_back("R=" + std::to_string(R) + ": " + w);
    prof.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < prof.rows.size(); ++i) {
    const auto& a = prof.rows[i - 1].fit;
    const auto& b = prof.rows[i].fit;
    if (b.slope > a.slope && b.slope_ci_lo > a.slope_ci_hi) {
      prof.monotone = false;
      prof.warnings.push_back("slope increases from R=" + std::to_string(prof.rows[i - 1].R) + " to R=" +
                              std::to_string(prof.rows[i].R));
    }
  }
  return prof;
}

TubeResult tube_probability(const SpectralField& v, const Trajectory& reference, double r,
                            const std::vector<double>& eps_list, std::size_t n, const FlowConfig& cfg, int threads) {
  if (!(r > 0.0)) throw InvalidArgument("tube radius must be positive");
  if (reference.size() < 2) throw InvalidArgument("reference trajectory too short");
  if (std::abs(reference.dt - cfg.dt) > 1e-9 * cfg.dt)
    throw InvalidArgument("reference must be recorded every integrator step");
  if (n == 0) throw InvalidArgument("tube probability needs samples");
  TubeResult out;
  out.reference_action = action_of_trajectory(reference, cfg);
  std::vector<ProbabilityEstimate> est;
  for (std::size_t ie = 0; ie < eps_list.size(); ++ie) {
    FlowConfig c = cfg;
    c.epsilon = eps_list[ie];
    const ExpEuler stepper(c);
    const auto inside = parallel_map(n, threads, [&](std::size_t j) {
      Rng rng(stream_seed(cfg.seed, ie * n + j));
      SpectralField u = v;
      for (std::size_t k = 0; k < reference.size(); ++k) {
        if (!(distance(u, reference.states[k]) < r)) return 0;
        if (k + 1 < reference.size()) stepper.advance(u, nullptr, &rng, static_cast<std::int64_t>(k));
      }
      return 1;
    });
    est.push_back(from_binomial(std::accumulate(inside.begin(), inside.end(), std::int64_t{0}),
                                static_cast<std::int64_t>(n)));
  }
  out.fit = fit_decay(eps_list, est);
  return out;
}

LowerBoundReport lower_bound_check(const SpectralField& target, double delta, const AttractorSet& attractor,
                                   const std::vector<EmpiricalMeasure>& measures, const FlowConfig& cfg,
                                   double tolerance, std::optional<double> quasipotential_value,
                                   const QuasipotentialSchedule* schedule) {
  LowerBoundReport rep;
  rep.tolerance = tolerance;
  if (!attractor.is_singleton()) {
    rep.refused = true;
    rep.reason = "the lower bound is only established when the attractor is a single point; this set has " +
                 std::to_string(attractor.size()) + " points";
    return rep;
  }
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  if (quasipotential_value) {
    rep.quasipotential = *quasipotential_value;
  } else {
    if (!schedule) throw InvalidArgument("lower_bound_check needs a quasipotential value or a schedule");
    rep.quasipotential = quasipotential(target, attractor.points, *schedule, cfg).value;
  }
  std::vector<double> eps;
  std::vector<ProbabilityEstimate> est;
  for (const auto& m : measures) {
    eps.push_back(m.meta.epsilon);
    est.push_back(event_probability(m, [&](const SpectralField& u) { return distance(u, target) < delta; }));
    rep.exponents.push_back(est.back().count > 0 ? -m.meta.epsilon * std::log(est.back().p) : kNaN);
  }
  rep.fit = fit_decay(eps, est);
  rep.fitted_exponent = rep.fit.censored_bound ? kNaN : -rep.fit.slope;
  const auto smallest = static_cast<std::size_t>(std::min_element(eps.begin(), eps.end()) - eps.begin());
  rep.exponent = rep.exponents[smallest];
  if (std::isnan(rep.exponent)) {
    rep.passed = false;
    rep.reason = "no samples in the ball at the smallest eps; the exponent is not measurable";
    return rep;
  }
  rep.passed = rep.exponent <= rep.quasipotential + tolerance;
  return rep;
}

void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m) {
  os << "chain,index,norm_h,norm_v\n";
  char buf[160];
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g\n", m.chain[i], i, norm_h(m.samples[i]), norm_v(m.samples[i]));
    os << buf;
  }
}

void write_decay_csv(std::ostream& os, const DecayFit& fit) {
  os << "eps,count,n,p_hat,ci_lo,ci_hi,censored\n";
  char buf[256];
  for (std::size_t i = 0; i < fit.eps_list.size(); ++i) {
    const auto& e = fit.estimates[i];
    std::snprintf(buf, sizeof buf, "%.17g,%lld,%lld,%.17g,%.17g,%.17g,%d\n", fit.eps_list[i],
                  static_cast<long long>(e.count), static_cast<long long>(e.n), e.p, e.ci_lo, e.ci_hi,
                  e.censored ? 1 : 0);
    os << buf;
  }
}

std::string decay_fit_json(const DecayFit& fit) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["slope"] = num(fit.slope);
  j["intercept"] = num(fit.intercept);
  j["slope_ci"] = {num(fit.slope_ci_lo), num(fit.slope_ci_hi)};
  j["points_used"] = fit.points_used;
  j["censored_bound"] = fit.censored_bound;
  j["negative_with_confidence"] = fit.negative_with_confidence();
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < fit.eps_list.size(); ++i) {
    const auto& e = fit.estimates[i];
    pts.push_back({{"eps", fit.eps_list[i]},
                   {"count", e.count},
                   {"n", e.n},
                   {"p", e.p},
                   {"ci", {e.ci_lo, e.ci_hi}},
                   {"effective_n", e.effective_n},
                   {"censored", e.censored}});
  }
  j["warnings"] = fit.warnings;
  return j.dump(2);
}

void write_decay_svg(std::ostream& os, const DecayFit& fit, const std::string& title) {
  const double W = 480, H = 360, ml = 60, mr = 20, mt = 40, mb = 50;
  std::vector<double> xs, ys, lo, hi;
  for (std::size_t i = 0; i < fit.eps_list.size(); ++i) {
    const auto& e = fit.estimates[i];
    xs.push_back(1.0 / fit.eps_list[i]);
    ys.push_back(e.count > 0 ? std::log(e.p) : std::log(std::max(e.ci_hi, 1e-300)));
    lo.push_back(std::log(std::max(e.ci_lo, 1e-300 + e.p * 1e-3 + 1e-12)));
    hi.push_back(std::log(std::max(e.ci_hi, 1e-300)));
  }
  double x0 = 0.0, x1 = *std::max_element(xs.begin(), xs.end()) * 1.05;
  double y0 = std::min(*std::min_element(lo.begin(), lo.end()), *std::min_element(ys.begin(), ys.end()));
  double y1 = std::max(0.0, *std::max_element(hi.begin(), hi.end()));
  const double xa = *std::min_element(xs.begin(), xs.end()), xb = *std::max_element(xs.begin(), xs.end());
  const bool line = !fit.censored_bound && std::isfinite(fit.intercept);
  if (line) {
    for (double x : {xa, xb}) {
      y0 = std::min(y0, fit.intercept + fit.slope * x);
      y1 = std::max(y1, fit.intercept + fit.slope * x);
    }
  }
  if (y1 - y0 < 1e-9) y0 = y1 - 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto X = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto Y = [&](double y) { return mt + (y1 - y) / (y1 - y0) * (H - mt - mb); };
  char buf[512];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"20\" text-anchor=\"middle\">", W / 2);
  os << buf;
  for (char c : title) {
    if (c == '<') os << "&lt;";
    else if (c == '&') os << "&amp;";
    else os << c;
  }
  os << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                ml, H - mb, W - mr, H - mb, ml, mt, ml, H - mb);
  os << buf;
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.3g</text>\n"
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n",
                  X(xv), H - mb + 16, xv, ml - 6, Y(yv) + 4, yv);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">1/eps</text>\n"
                "<text x=\"14\" y=\"%g\" transform=\"rotate(-90 14 %g)\" text-anchor=\"middle\">ln p</text>\n",
                (W + ml) / 2, H - 10, (H - mb + mt) / 2, (H - mb + mt) / 2);
  os << buf;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool cens = fit.estimates[i].count == 0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"gray\"/>\n"
                  "<circle cx=\"%g\" cy=\"%g\" r=\"4\" fill=\"%s\" stroke=\"black\"/>\n",
                  X(xs[i]), Y(lo[i]), X(xs[i]), Y(hi[i]), X(xs[i]), Y(ys[i]), cens ? "white" : "black");
    os << buf;
  }
  if (line) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"steelblue\" stroke-width=\"2\"/>\n"
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">slope %.4g [%.4g, %.4g]</text>\n",
                  X(xa), Y(fit.intercept + fit.slope * xa), X(xb), Y(fit.intercept + fit.slope * xb), W - mr,
                  mt + 12, fit.slope, fit.slope_ci_lo, fit.slope_ci_hi);
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace nsldp
