#include "nsldp/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "nsldp/errors.hpp"
#include "nsldp/parallel.hpp"

namespace nsldp {

std::string to_string(AttractorKind kind) { return kind == AttractorKind::OmegaLimit ? "omega" : "global"; }

AttractorKind attractor_kind_from_string(const std::string& s) {
  if (s == "omega") return AttractorKind::OmegaLimit;
  if (s == "global") return AttractorKind::Global;
  throw InvalidArgument("unknown attractor kind '" + s + "' (expected omega or global)");
}

AttractorSet AttractorSet::singleton(const SpectralField& point, AttractorKind kind) {
  AttractorSet s;
  s.points = {point};
  s.kind = kind;
  s.origin.v_norm_bound = norm_v(point);
  return s;
}

double AttractorSet::distance_to(const SpectralField& u) const {
  if (points.empty()) throw InvalidArgument("empty attractor set");
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : points) d = std::min(d, distance(u, p));
  return d;
}

std::size_t AttractorSet::nearest(const SpectralField& u) const {
  if (points.empty()) throw InvalidArgument("empty attractor set");
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double di = distance(u, points[i]);
    if (di < d) {
      d = di;
      best = i;
    }
  }
  return best;
}

namespace {

void merge_into(std::vector<SpectralField>& kept, const SpectralField& u, double tol) {
  for (const auto& p : kept)
    if (distance(p, u) < tol) return;
  kept.push_back(u);
}

}  // namespace

AttractorSet approximate_omega_set(const std::vector<SpectralField>& ensemble, double transient_time,
                                   double collect_time, double sample_dt, double cluster_tol, const FlowConfig& cfg,
                                   int threads) {
  if (ensemble.empty()) throw InvalidArgument("approximate_omega_set needs a non-empty ensemble");
  if (!(transient_time > 0.0) || !(collect_time > 0.0))
    throw InvalidArgument("transient and collection times must be positive");
  if (!(sample_dt > 0.0)) throw InvalidArgument("sample_dt must be positive");
  if (!(cluster_tol > 0.0)) throw InvalidArgument("cluster_tol must be positive");
  cfg.validate();
  const auto transient_steps = std::llround(transient_time / cfg.dt);
  const auto stride = std::max<std::int64_t>(1, std::llround(sample_dt / cfg.dt));
  const auto collect_steps = std::llround(collect_time / cfg.dt);

  struct Samples {
    std::vector<SpectralField> states;
    double vmax = 0.0;
  };
  auto runs = parallel_map(ensemble.size(), threads, [&](std::size_t i) {
    Samples out;
    const SpectralField start = flow_map(ensemble[i], cfg, transient_steps);
    const auto traj = integrate_deterministic(start, cfg, collect_steps, stride);
    for (std::size_t j = 0; j < traj.size(); ++j) out.vmax = std::max(out.vmax, traj.observables[j].norm_v);
    out.states = traj.states;
    return out;
  });

  AttractorSet set;
  set.kind = AttractorKind::OmegaLimit;
  set.cluster_tol = cluster_tol;
  set.origin = {ensemble.size(), transient_time, collect_time, static_cast<double>(stride) * cfg.dt, 0.0};
  for (const auto& r : runs) {
    set.origin.v_norm_bound = std::max(set.origin.v_norm_bound, r.vmax);
    for (const auto& s : r.states) merge_into(set.points, s, cluster_tol);
  }
  return set;
}

AttractorSet augment_global(const AttractorSet& omega, const std::vector<SpectralField>& extra) {
  AttractorSet out = omega;
  out.kind = AttractorKind::Global;
  for (const auto& e : extra) {
    merge_into(out.points, e, omega.cluster_tol);
    out.origin.v_norm_bound = std::max(out.origin.v_norm_bound, norm_v(e));
  }
  return out;
}

double invariance_defect(const AttractorSet& set, const FlowConfig& cfg, double t) {
  double worst = 0.0;
  const auto steps = std::llround(t / cfg.dt);
  for (const auto& p : set.points) worst = std::max(worst, set.distance_to(flow_map(p, cfg, steps)));
  return worst;
}

double deterministic_hitting_time(const SpectralField& v, const AttractorSet& set, double eta, const FlowConfig& cfg,
                                  double t_max) {
  if (!(eta > 0.0) || !(t_max > 0.0)) throw InvalidArgument("hitting time needs eta > 0 and t_max > 0");
  FlowConfig det = cfg;
  det.epsilon = 0.0;
  const ExpEuler stepper(det);
  const double r = 0.25 * eta;
  SpectralField u = v;
  const auto n_max = std::llround(t_max / cfg.dt);
  for (std::int64_t n = 0;; ++n) {
    if (set.distance_to(u) < r) return static_cast<double>(n) * cfg.dt;
    if (n >= n_max) return kNotHit;
    stepper.advance(u, nullptr, nullptr, n);
  }
}

HittingSweep hitting_time_sweep(const AttractorSet& set, double eta, double R, std::size_t n, std::uint64_t seed,
                                const FlowConfig& cfg, double t_max, int threads) {
  if (!(R > 0.0)) throw InvalidArgument("ball radius R must be positive");
  HittingSweep sweep;
  Rng rng(seed);
  const auto basis = cfg.basis();
  const double dim = 2.0 * static_cast<double>(basis->size());
  for (std::size_t i = 0; i < n; ++i) {
    SpectralField u(basis);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = Complex(rng.normal(), rng.normal());
    const double radius = R * std::pow(rng.uniform(), 1.0 / dim);
    u *= radius / norm_h(u);
    sweep.starts.push_back(std::move(u));
  }
  sweep.times = parallel_map(n, threads, [&](std::size_t i) {
    return deterministic_hitting_time(sweep.starts[i], set, eta, cfg, t_max);
  });
  for (double t : sweep.times) sweep.sup = std::max(sweep.sup, t);
  return sweep;
}

BinomialEstimate binomial_estimate(std::int64_t count, std::int64_t n, double alpha) {
  if (n <= 0 || count < 0 || count > n) throw InvalidArgument("binomial estimate needs 0 <= count <= n, n > 0");
  BinomialEstimate e;
  e.count = count;
  e.n = n;
  const double nn = static_cast<double>(n);
  e.p = static_cast<double>(count) / nn;
  if (count == 0) {
    e.censored = true;
    e.ci_lo = 0.0;
    e.ci_hi = 1.0 - std::pow(alpha, 1.0 / nn);
    return e;
  }
  if (count == n) {
    e.censored = true;
    e.ci_lo = std::pow(alpha, 1.0 / nn);
    e.ci_hi = 1.0;
    return e;
  }
  const double z = 1.959963984540054;
  const double denom = 1.0 + z * z / nn;
  const double centre = (e.p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(e.p * (1.0 - e.p) / nn + z * z / (4.0 * nn * nn)) / denom;
  e.ci_lo = std::max(0.0, centre - half);
  e.ci_hi = std::min(1.0, centre + half);
  return e;
}

const HittingRow& HittingTable::at(std::size_t eps_index, std::size_t s_index) const {
  return rows.at(eps_index * s_count + s_index);
}

HittingTable stochastic_hitting_tail(const SpectralField& v, const AttractorSet& set, double eta,
                                     const std::vector<double>& eps_list, const std::vector<double>& s_list,
                                     std::size_t n_samples, const FlowConfig& cfg, int threads) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (eps_list.empty() || s_list.empty() || n_samples == 0)
    throw InvalidArgument("hitting tail needs eps values, s values and samples");
  for (double e : eps_list)
    if (!(e > 0.0)) throw InvalidArgument("all epsilon values must be positive");
  for (std::size_t i = 0; i < s_list.size(); ++i)
    if (s_list[i] < 0.0 || (i > 0 && !(s_list[i] > s_list[i - 1])))
      throw InvalidArgument("s values must be non-negative and increasing");

  std::vector<std::int64_t> s_steps;
  for (double s : s_list) s_steps.push_back(static_cast<std::int64_t>(std::ceil(s / cfg.dt - 1e-9)));
  const std::int64_t horizon = s_steps.back();

  HittingTable table;
  table.s_count = s_list.size();
  for (std::size_t ie = 0; ie < eps_list.size(); ++ie) {
    FlowConfig c = cfg;
    c.epsilon = eps_list[ie];
    const ExpEuler stepper(c);
    // hitting step of each sample, horizon + 1 if not hit
    const auto hits = parallel_map(n_samples, threads, [&](std::size_t j) {
      Rng rng(stream_seed(cfg.seed, ie * n_samples + j));
      SpectralField u = v;
      for (std::int64_t n = 0; n <= horizon; ++n) {
        if (set.distance_to(u) <= eta) return n;
        if (n < horizon) stepper.advance(u, nullptr, &rng, n);
      }
      return horizon + 1;
    });
    HittingTrend trend;
    trend.epsilon = eps_list[ie];
    std::vector<double> xs, ys;
    for (std::size_t is = 0; is < s_list.size(); ++is) {
      std::int64_t count = 0;
      for (auto h : hits)
        if (h >= s_steps[is]) ++count;
      HittingRow row{eps_list[ie], s_list[is], binomial_estimate(count, static_cast<std::int64_t>(n_samples))};
      if (count == 0)
        table.warnings.push_back("eps=" + std::to_string(eps_list[ie]) + " s=" + std::to_string(s_list[is]) +
                                 ": no samples, upper bound only");
      else if (count < static_cast<std::int64_t>(n_samples)) {
        xs.push_back(s_list[is]);
        ys.push_back(eps_list[ie] * std::log(row.estimate.p));
      }
      table.rows.push_back(row);
    }
    trend.points = xs.size();
    if (xs.size() >= 2) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
      mx /= static_cast<double>(xs.size());
      my /= static_cast<double>(xs.size());
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
      trend.slope = sxy / sxx;
    } else {
      trend.slope = std::numeric_limits<double>::quiet_NaN();
    }
    table.trends.push_back(trend);
  }
  return table;
}

void write_hitting_csv(std::ostream& os, const HittingTable& table) {
  os << "eps,s,count,n,p_hat,ci_lo,ci_hi,censored\n";
  char buf[256];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%lld,%lld,%.17g,%.17g,%.17g,%d\n", r.epsilon, r.s,
                  static_cast<long long>(r.estimate.count), static_cast<long long>(r.estimate.n), r.estimate.p,
                  r.estimate.ci_lo, r.estimate.ci_hi, r.estimate.censored ? 1 : 0);
    os << buf;
  }
}

void save_attractor(const std::string& dir, const AttractorSet& set) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json m;
  m["kind"] = to_string(set.kind);
  m["cluster_tol"] = set.cluster_tol;
  m["origin"] = {{"ensemble_size", set.origin.ensemble_size},
                     {"transient_time", set.origin.transient_time},
                     {"collect_time", set.origin.collect_time},
                     {"sample_dt", set.origin.sample_dt},
                     {"v_norm_bound", set.origin.v_norm_bound}};
  auto& files = m["points"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu.csv", i);
    save_field_csv((fs::path(dir) / name).string(), set.points[i]);
    files.push_back(name);
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw InvalidArgument("cannot write attractor manifest in " + dir);
  os << m.dump(2) << "\n";
}

AttractorSet load_attractor(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw InvalidArgument("no attractor manifest in " + dir);
  const auto m = nlohmann::json::parse(is);
  AttractorSet set;
  set.kind = attractor_kind_from_string(m.at("kind").get<std::string>());
  set.cluster_tol = m.at("cluster_tol").get<double>();
  const auto& p = m.at("origin");
  set.origin.ensemble_size = p.at("ensemble_size").get<std::size_t>();
  set.origin.transient_time = p.at("transient_time").get<double>();
  set.origin.collect_time = p.at("collect_time").get<double>();
  set.origin.sample_dt = p.at("sample_dt").get<double>();
  set.origin.v_norm_bound = p.at("v_norm_bound").get<double>();
  BasisPtr basis;
  for (const auto& f : m.at("points")) {
    set.points.push_back(load_field_csv((fs::path(dir) / f.get<std::string>()).string(), basis));
    basis = set.points.back().basis();
  }
  if (set.points.empty()) throw InvalidArgument("attractor manifest lists no points");
  return set;
}

}  // namespace nsldp
