#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "nsldp/action.hpp"
#include "nsldp/attractor.hpp"
#include "nsldp/errors.hpp"
#include "nsldp/measure.hpp"
#include "nsldp/reconstruct.hpp"

namespace nsldp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ofstream open_output(Context& ctx, const std::string& name) {
  std::ofstream os(ctx.manifest.output(name));
  if (!os) throw InvalidArgument("cannot write " + name);
  os << std::setprecision(17);
  return os;
}

void write_json(Context& ctx, const std::string& name, const json& j) { open_output(ctx, name) << j.dump(2) << '\n'; }

// Registers every file below out_dir/sub as an output.
void register_tree(Context& ctx, const std::string& sub) {
  const fs::path root = fs::path(ctx.manifest.out_dir()) / sub;
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) names.push_back(fs::relative(e.path(), ctx.manifest.out_dir()).string());
  std::sort(names.begin(), names.end());
  for (const auto& n : names) ctx.manifest.output(n);
}

FlowConfig flow_of(Context& ctx) {
  const auto& c = ctx.config;
  for (const char* key : {"flow.forcing", "flow.initial"}) {
    const auto& v = c.get_string(key);
    if (v != "default" && v != "zero") ctx.manifest.input(v);
  }
  return flow_config_from(c);
}

std::size_t mode_10(const BasisPtr& b) {
  bool neg = false;
  return static_cast<std::size_t>(b->find({1, 0}, &neg));
}

SpectralField field_or(Context& ctx, const std::string& key, const BasisPtr& basis, const SpectralField& fallback) {
  const auto& path = ctx.config.get_string(key);
  if (path.empty() || path == "zero") return path == "zero" ? SpectralField(basis) : fallback;
  ctx.manifest.input(path);
  try {
    return load_field_csv(path, basis);
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::vector<SpectralField> ensemble(const Context& ctx, const BasisPtr& b) {
  const auto n = ctx.config.get_int("attractor.ensemble");
  if (n < 1) throw ConfigError("attractor.ensemble", "must be at least 1");
  const double scale = ctx.config.get_double("attractor.ensemble_scale");
  Rng rng(stream_seed(static_cast<std::uint64_t>(ctx.config.get_int("run.seed")), 0xa77));
  std::vector<SpectralField> out;
  for (std::int64_t i = 0; i < n; ++i) {
    SpectralField u(b);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = Complex(rng.normal(), rng.normal()) * (scale / b->eigenvalue(k));
    out.push_back(std::move(u));
  }
  return out;
}

AttractorSet attractor_of(Context& ctx, const FlowConfig& cfg) {
  const auto& dir = ctx.config.get_string("attractor.dir");
  if (!dir.empty()) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) ctx.manifest.input(e.path().string());
    auto set = load_attractor(dir);
    if (set.basis()->cutoff() != cfg.basis()->cutoff())
      throw ConfigError("attractor.dir", "attractor basis differs from basis.K");
    return set;
  }
  FlowConfig det = cfg;
  det.epsilon = 0.0;
  const auto& c = ctx.config;
  return approximate_omega_set(ensemble(ctx, cfg.basis()), c.get_double("attractor.transient"),
                               c.get_double("attractor.collect"), c.get_double("attractor.sample_dt"),
                               c.get_double("attractor.cluster_tol"), det, ctx.threads);
}

SamplingSettings sampling_of(const Context& ctx, double eps) {
  const auto& c = ctx.config;
  SamplingSettings s;
  const double burn = c.get_double("measure.burn_in");
  s.burn_in = burn > 0.0 ? burn : default_burn_in(eps);
  s.horizon = c.get_double("measure.horizon");
  s.stride = c.get_int("measure.stride");
  s.chains = static_cast<int>(c.get_int("measure.chains"));
  s.threads = ctx.threads;
  if (!(s.burn_in < s.horizon))
    throw ConfigError(burn > 0.0 ? "measure.burn_in" : "measure.horizon",
                      "burn-in " + std::to_string(s.burn_in) + " must be below the horizon " +
                          std::to_string(s.horizon));
  return s;
}

std::vector<double> eps_list_of(const Context& ctx, std::size_t min_size) {
  const auto eps = ctx.config.get_doubles("measure.eps_list");
  if (eps.size() < min_size)
    throw ConfigError("measure.eps_list", "needs at least " + std::to_string(min_size) + " noise levels (slope fit)");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw ConfigError("measure.eps_list", "noise levels must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("measure.eps_list", "noise levels must be decreasing");
  }
  return eps;
}

// One measure per noise level; level i samples with seed stream i.
std::vector<EmpiricalMeasure> measures_of(Context& ctx, const FlowConfig& cfg, const std::vector<double>& eps,
                                          const SpectralField& start) {
  std::vector<EmpiricalMeasure> out;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    FlowConfig c = cfg;
    c.seed = stream_seed(cfg.seed, i);
    auto s = sampling_of(ctx, eps[i]);
    s.start = start;
    out.push_back(sample_stationary(eps[i], c, s));
  }
  return out;
}

json estimate_json(const ProbabilityEstimate& p) {
  json j;
  j["p"] = p.p;
  j["ci_lo"] = p.ci_lo;
  j["ci_hi"] = p.ci_hi;
  j["std_error"] = p.std_error;
  j["count"] = p.count;
  j["n"] = p.n;
  j["censored"] = p.censored;
  return j;
}

QuasipotentialSchedule schedule_of(const Context& ctx) {
  const auto& c = ctx.config;
  const auto stages = c.get_int("action.stages");
  if (stages < 1) throw ConfigError("action.stages", "must be at least 1");
  auto s = default_schedule(c.get_double("action.eta"), c.get_double("action.horizon"), static_cast<int>(stages));
  s.optimizer.max_iterations = static_cast<int>(c.get_int("action.max_iterations"));
  s.check_horizon_doubling = c.get_bool("action.check_doubling");
  s.threads = ctx.threads;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

int simulate(Context& ctx) {
  const auto& c = ctx.config;
  const auto cfg = flow_of(ctx);
  const auto b = cfg.basis();
  const auto steps = static_cast<std::int64_t>(std::llround(c.get_double("flow.T") / cfg.dt));
  const auto every = c.get_int("flow.record_every");
  const auto snap = c.get_int("flow.snapshot_every");
  if (every < 1) throw ConfigError("flow.record_every", "must be at least 1");
  if (snap < 0) throw ConfigError("flow.snapshot_every", "must be non-negative");

  SpectralField u = field_or(ctx, "flow.initial", b, SpectralField(b));
  Rng rng(cfg.seed);
  std::int64_t first = 0;
  if (const auto& resume = c.get_string("flow.resume"); !resume.empty()) {
    ctx.manifest.input(resume);
    const auto cp = load_checkpoint(resume, b);
    u = cp.state;
    rng.restore(cp.rng_state);
    first = cp.step;
  }

  const ExpEuler stepper(cfg);
  Trajectory traj;
  traj.dt = static_cast<double>(every) * cfg.dt;
  traj.push(static_cast<double>(first) * cfg.dt, u);
  for (std::int64_t n = first; n < first + steps; ++n) {
    stepper.advance(u, nullptr, cfg.epsilon > 0.0 ? &rng : nullptr, n);
    const auto done = n + 1 - first;
    if (done % every == 0) traj.push(static_cast<double>(n + 1) * cfg.dt, u);
    if (snap > 0 && done % snap == 0) {
      std::ostringstream name;
      name << "snapshots/state_" << std::setw(9) << std::setfill('0') << (n + 1) << ".csv";
      auto os = open_output(ctx, name.str());
      write_field_csv(os, u);
    }
  }
  {
    auto os = open_output(ctx, "trajectory.csv");
    write_trajectory_csv(os, traj);
  }
  {
    auto os = open_output(ctx, "final_state.csv");
    write_field_csv(os, u);
  }
  save_checkpoint(ctx.manifest.output("checkpoint.txt"),
                  Checkpoint{first + steps, static_cast<double>(first + steps) * cfg.dt, u, rng.state()});

  if (const double gain = c.get_double("coupling.gain"); gain > 0.0) {
    CouplingConfig coupling;
    coupling.gain = gain;
    const auto m = c.get_int("coupling.modes");
    if (m < 0) throw ConfigError("coupling.modes", "must be non-negative");
    coupling.modes = m == 0 ? b->size() : static_cast<std::size_t>(m);
    const auto u0 = field_or(ctx, "flow.initial", b, SpectralField(b));
    Rng off(stream_seed(cfg.seed, 0xc0));
    SpectralField w0 = u0;
    const double scale = c.get_double("coupling.offset");
    for (std::size_t k = 0; k < w0.size(); ++k) w0[k] += Complex(off.normal(), off.normal()) * scale;
    FlowConfig det = cfg;
    det.epsilon = 0.0;
    const auto run = integrate_coupled(u0, w0, det, coupling, nullptr, c.get_double("flow.T"), every);
    auto os = open_output(ctx, "coupling.csv");
    os << "t,distance,grad_integral\n";
    for (std::size_t i = 0; i < run.log.times.size(); ++i)
      os << run.log.times[i] << ',' << run.log.distance[i] << ',' << run.log.grad_integral[i] << '\n';
    json j;
    j["gain"] = gain;
    j["modes"] = coupling.modes;
    j["decay_slope"] = run.log.decay_slope();
    write_json(ctx, "coupling.json", j);
  }
  std::cout << "simulated " << steps << " steps; final ||u|| = " << norm_h(u) << '\n';
  return kOk;
}

int attractor(Context& ctx) {
  const auto& c = ctx.config;
  auto cfg = flow_of(ctx);
  const auto set = attractor_of(ctx, cfg);
  save_attractor((fs::path(ctx.manifest.out_dir()) / "attractor").string(), set);
  register_tree(ctx, "attractor");

  FlowConfig det = cfg;
  det.epsilon = 0.0;
  json summary;
  summary["points"] = set.size();
  summary["kind"] = to_string(set.kind);
  summary["cluster_tol"] = set.cluster_tol;
  summary["invariance_defect"] = invariance_defect(set, det, 1.0);
  {
    auto os = open_output(ctx, "points.csv");
    os << "index,norm_h,norm_v\n";
    for (std::size_t i = 0; i < set.size(); ++i)
      os << i << ',' << norm_h(set.points[i]) << ',' << norm_v(set.points[i]) << '\n';
  }

  int status = kOk;
  const double offset = c.get_double("attractor.hitting_offset");
  if (offset > 0.0) {
    const double eta = c.get_double("attractor.eta");
    const double t_max = c.get_double("attractor.t_max");
    const auto b = cfg.basis();
    const auto v = set.points.front() + SpectralField::unit(b, mode_10(b), offset);
    const double td = deterministic_hitting_time(v, set, eta, det, t_max);
    summary["hitting_start_offset"] = offset;
    summary["deterministic_hitting_time"] = std::isfinite(td) ? json(td) : json(nullptr);
    if (!std::isfinite(td)) {
      ctx.manifest.warn("deterministic flow did not reach eta/4 of the attractor by attractor.t_max");
      status = kAssertionFailure;
    } else {
      auto s_list = c.get_doubles("attractor.hitting_s");
      if (s_list.empty())
        for (double f : {0.0, 0.5, 1.0, 2.0, 3.0}) s_list.push_back(f * td);
      const auto n = c.get_int("attractor.hitting_samples");
      if (n < 1) throw ConfigError("attractor.hitting_samples", "must be at least 1");
      const auto table = stochastic_hitting_tail(v, set, eta, c.get_doubles("attractor.hitting_eps"), s_list,
                                                 static_cast<std::size_t>(n), cfg, ctx.threads);
      auto os = open_output(ctx, "hitting_times.csv");
      write_hitting_csv(os, table);
      for (const auto& w : table.warnings) ctx.manifest.warn(w);
      json trends = json::array();
      for (const auto& t : table.trends) {
        json r;
        r["eps"] = t.epsilon;
        r["slope"] = std::isfinite(t.slope) ? json(t.slope) : json(nullptr);
        r["points"] = t.points;
        trends.push_back(r);
      }
      summary["hitting_trends"] = trends;
    }
  }
  write_json(ctx, "attractor_summary.json", summary);
  std::cout << "attractor: " << set.size() << " point(s)\n";
  return status;
}

int quasipotential(Context& ctx) {
  const auto& c = ctx.config;
  const auto cfg = flow_of(ctx);
  const auto b = cfg.basis();
  const auto set = attractor_of(ctx, cfg);
  const auto fallback = set.points.front() + SpectralField::unit(b, mode_10(b), c.get_double("action.target_norm"));
  const auto target = field_or(ctx, "action.target", b, fallback);

  if (const auto& replay = c.get_string("action.control"); !replay.empty()) {
    ctx.manifest.input(replay);
    std::ifstream in(replay);
    if (!in) throw ConfigError("action.control", "cannot open " + replay);
    const auto phi = read_control_csv(in, b);
    FlowConfig det = cfg;
    det.epsilon = 0.0;
    const auto traj = integrate_controlled(set.points.front(), det, phi);
    json j;
    j["action"] = path_action(phi, cfg.noise);
    j["terminal_gap"] = distance(traj.states.back(), target);
    j["horizon"] = phi.horizon();
    write_json(ctx, "replay.json", j);
    auto os = open_output(ctx, "replay_trajectory.csv");
    write_trajectory_csv(os, traj);
    std::cout << "replayed action " << j["action"].get<double>() << '\n';
    return kOk;
  }

  const auto schedule = schedule_of(ctx);
  const auto r = quasipotential(target, set.points, schedule, cfg);
  open_output(ctx, "action_result.json") << action_result_json(r) << '\n';
  {
    auto os = open_output(ctx, "control.csv");
    write_control_csv(os, r.control);
  }
  {
    auto os = open_output(ctx, "continuation.csv");
    os << "stage,eta,penalty,horizon,value,converged\n";
    for (std::size_t i = 0; i < r.continuation_trace.size(); ++i) {
      const auto& s = r.continuation_trace[i];
      os << i << ',' << s.eta << ',' << s.penalty << ',' << s.horizon << ',' << s.value << ','
         << (s.converged ? 1 : 0) << '\n';
    }
  }
  for (const auto& w : r.warnings) ctx.manifest.warn(w);
  std::cout << "quasipotential " << r.value << " (gap " << r.terminal_gap << ")\n";
  return r.converged ? kOk : kAssertionFailure;
}

int exit_action(Context& ctx) {
  const auto& c = ctx.config;
  const auto cfg = flow_of(ctx);
  const auto set = attractor_of(ctx, cfg);
  ExitActionSettings s;
  s.starts = static_cast<int>(c.get_int("action.exit_starts"));
  s.seed = static_cast<std::uint64_t>(c.get_int("run.seed"));
  s.optimizer.max_iterations = static_cast<int>(c.get_int("action.max_iterations"));
  s.threads = ctx.threads;
  const auto r = min_exit_action(c.get_double("action.exit_ball"), c.get_double("action.exit_eta"),
                                 c.get_double("action.horizon"), set.points, cfg, s);
  json j;
  j["value"] = r.value;
  j["degenerate"] = r.degenerate;
  j["converged"] = r.converged;
  j["terminal_distance"] = r.terminal_distance;
  j["start_norm"] = norm_h(r.start);
  j["ball_radius"] = c.get_double("action.exit_ball");
  j["eta"] = c.get_double("action.exit_eta");
  j["horizon"] = c.get_double("action.horizon");
  j["diagnostic"] = r.diagnostic;
  write_json(ctx, "exit_action.json", j);
  {
    auto os = open_output(ctx, "exit_control.csv");
    write_control_csv(os, r.control);
  }
  {
    auto os = open_output(ctx, "exit_start.csv");
    write_field_csv(os, r.start);
  }
  if (r.degenerate) ctx.manifest.warn("exit action is degenerate: " + r.diagnostic);
  // an unconverged minimiser still gives an upper bound; only a path that
  // never leaves the neighbourhood is a failure
  if (!r.converged) ctx.manifest.warn("exit action not converged (" + r.diagnostic + "); value is an upper bound");
  std::cout << "exit action " << r.value << '\n';
  return r.degenerate || r.terminal_distance >= 0.999 * c.get_double("action.exit_eta") ? kOk : kAssertionFailure;
}

int stationary(Context& ctx) {
  const auto cfg = flow_of(ctx);
  const auto eps = eps_list_of(ctx, 1);
  const auto ms = measures_of(ctx, cfg, eps, attractor_of(ctx, cfg).points.front());
  auto st = open_output(ctx, "stationarity.csv");
  st << "eps,samples,mean_first,mean_second,z,passed\n";
  for (std::size_t i = 0; i < ms.size(); ++i) {
    {
      auto os = open_output(ctx, "measure_" + std::to_string(i) + ".csv");
      write_measure_csv(os, ms[i]);
    }
    const auto r = stationarity_check(ms[i]);
    st << eps[i] << ',' << ms[i].size() << ',' << r.mean_first << ',' << r.mean_second << ',' << r.z << ','
       << (r.passed ? 1 : 0) << '\n';
    if (!r.passed) ctx.manifest.warn("eps=" + std::to_string(eps[i]) + ": halves differ (burn-in may be short)");
  }
  std::cout << "sampled " << ms.size() << " measure(s)\n";
  return kOk;
}

int decay(Context& ctx) {
  const auto& c = ctx.config;
  const auto eps = eps_list_of(ctx, 3);
  const auto cfg = flow_of(ctx);
  const auto set = attractor_of(ctx, cfg);
  const auto ms = measures_of(ctx, cfg, eps, set.points.front());
  const double eta = c.get_double("measure.eta");
  int status = kOk;

  const auto fit = attracting_decay(set, eta, ms);
  {
    auto os = open_output(ctx, "decay.csv");
    write_decay_csv(os, fit);
  }
  open_output(ctx, "decay.json") << decay_fit_json(fit) << '\n';
  {
    auto os = open_output(ctx, "decay.svg");
    write_decay_svg(os, fit, "mu(dist >= " + std::to_string(eta) + ")");
  }
  for (const auto& w : fit.warnings) ctx.manifest.warn(w);
  if (!fit.negative_with_confidence()) status = kAssertionFailure;
  std::cout << "decay slope " << fit.slope << " [" << fit.slope_ci_lo << ", " << fit.slope_ci_hi << "]\n";

  if (const auto R = c.get_doubles("measure.R_list"); !R.empty()) {
    const auto prof = tightness_profile(R, ms);
    auto os = open_output(ctx, "tightness.csv");
    os << "R,slope,ci_lo,ci_hi,censored\n";
    for (const auto& row : prof.rows)
      os << row.R << ',' << row.fit.slope << ',' << row.fit.slope_ci_lo << ',' << row.fit.slope_ci_hi << ','
         << (row.fit.censored_bound ? 1 : 0) << '\n';
    for (const auto& w : prof.warnings) ctx.manifest.warn(w);
    if (!prof.monotone) status = kAssertionFailure;
  }

  const auto b = cfg.basis();
  if (const double r = c.get_double("measure.tube_radius"); r > 0.0) {
    const auto v = set.points.front() + SpectralField::unit(b, mode_10(b), c.get_double("action.target_norm"));
    FlowConfig det = cfg;
    det.epsilon = 0.0;
    const auto steps = static_cast<std::int64_t>(std::llround(c.get_double("measure.tube_T") / cfg.dt));
    const auto ref = integrate_deterministic(v, det, steps);
    const auto n = c.get_int("measure.tube_samples");
    if (n < 1) throw ConfigError("measure.tube_samples", "must be at least 1");
    const auto tube = tube_probability(v, ref, r, eps, static_cast<std::size_t>(n), cfg, ctx.threads);
    auto os = open_output(ctx, "tube.csv");
    write_decay_csv(os, tube.fit);
    auto j = json::parse(decay_fit_json(tube.fit));
    j["reference_action"] = tube.reference_action;
    write_json(ctx, "tube.json", j);
  }

  if (const double delta = c.get_double("measure.lower_delta"); delta > 0.0) {
    const auto fallback = set.points.front() + SpectralField::unit(b, mode_10(b), 0.5);
    const auto target = field_or(ctx, "measure.lower_target", b, fallback);
    const auto schedule = schedule_of(ctx);
    const auto rep = lower_bound_check(target, delta, set, ms, cfg, c.get_double("measure.lower_tolerance"),
                                       std::nullopt, &schedule);
    json j;
    j["refused"] = rep.refused;
    j["reason"] = rep.reason;
    j["quasipotential"] = rep.quasipotential;
    j["exponent"] = std::isfinite(rep.exponent) ? json(rep.exponent) : json(nullptr);
    j["fitted_exponent"] = std::isfinite(rep.fitted_exponent) ? json(rep.fitted_exponent) : json(nullptr);
    j["tolerance"] = rep.tolerance;
    j["passed"] = rep.passed;
    json per = json::array();
    for (std::size_t i = 0; i < rep.exponents.size(); ++i) {
      json e;
      e["eps"] = eps[i];
      e["exponent"] = std::isfinite(rep.exponents[i]) ? json(rep.exponents[i]) : json(nullptr);
      e["estimate"] = estimate_json(rep.fit.estimates[i]);
      per.push_back(e);
    }
    j["per_eps"] = per;
    write_json(ctx, "lower_bound.json", j);
    if (rep.refused)
      ctx.manifest.warn("lower bound refused: " + rep.reason);
    else if (!rep.passed)
      status = kAssertionFailure;
  }
  return status;
}

int reconstruct(Context& ctx) {
  const auto& c = ctx.config;
  if (const auto& path = c.get_string("reconstruct.chain"); !path.empty()) {
    ctx.manifest.input(path);
    FiniteChain chain;
    try {
      chain = load_chain(path);
    } catch (const InvalidArgument& e) {
      throw ConfigError("reconstruct.chain", e.what());
    }
    const auto pi = chain_stationary(chain);
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(chain.size());
    for (double g : c.get_doubles("reconstruct.gamma")) {
      const auto i = static_cast<int>(std::llround(g));
      if (i < 0 || i >= chain.size() || static_cast<double>(i) != g)
        throw ConfigError("reconstruct.gamma", "state indices must be integers in [0, n)");
      gamma[i] = 1.0;
    }
    const auto delta = static_cast<int>(std::llround(c.get_double("reconstruct.delta")));
    if (delta < 1) throw ConfigError("reconstruct.delta", "chain windows need delta >= 1");
    std::vector<int> shifts;
    for (double s : c.get_doubles("reconstruct.shifts")) shifts.push_back(static_cast<int>(std::llround(s)));

    const auto sandwich = sandwich_check(chain, pi, delta, gamma, gamma);
    const auto shift = shift_invariance_check(chain, pi, delta, gamma, shifts);
    const auto mixing = b0_mixing_check(chain, {gamma}, {1, 2, 4, 8, 16, 32});
    {
      auto os = open_output(ctx, "stationary.csv");
      os << "state,pi,tau,r_delta\n";
      const auto r = r_delta(chain, delta, gamma);
      for (int i = 0; i < chain.size(); ++i) os << i << ',' << pi[i] << ',' << chain.tau[i] << ',' << r[i] << '\n';
    }
    {
      auto os = open_output(ctx, "shift.csv");
      os << "s,lambda,deviation\n";
      os << 0 << ',' << shift.base << ',' << 0.0 << '\n';
      for (std::size_t i = 0; i < shift.shifts.size(); ++i)
        os << shift.shifts[i] << ',' << shift.values[i] << ',' << std::abs(shift.values[i] - shift.base) << '\n';
    }
    {
      auto os = open_output(ctx, "reconstruct_report.txt");
      write_sandwich_report(os, sandwich);
      write_shift_report(os, shift);
      os << "second eigenvalue modulus = " << mixing.second_eigenvalue << '\n'
         << "mixing within spectral rate: " << (mixing.within_rate ? "pass" : "FAIL") << '\n';
    }
    std::cout << "lambda(Gamma) = " << sandwich.lambda_closure << ", mu(Gamma) = " << sandwich.mu_closure << '\n';
    return sandwich.passed() && shift.passed ? kOk : kAssertionFailure;
  }

  const auto eps = eps_list_of(ctx, 1);
  const auto cfg = flow_of(ctx);
  const auto set = attractor_of(ctx, cfg);
  const auto ms = measures_of(ctx, cfg, eps, set.points.front());
  const double eta = c.get_double("measure.eta");
  LambdaSettings ls;
  ls.outer_samples = static_cast<std::size_t>(c.get_int("reconstruct.outer_samples"));
  ls.delta = c.get_double("reconstruct.delta");
  ls.delta_max = c.get_double("reconstruct.delta_max");
  ls.threads = ctx.threads;
  auto os = open_output(ctx, "lambda.csv");
  os << "eps,delta,lambda,lambda_ci_lo,lambda_ci_hi,mu,mu_ci_lo,mu_ci_hi,ordering\n";
  int status = kOk;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    FlowConfig fc = cfg;
    fc.epsilon = eps[i];
    const FlowModel model(fc, set, eta, c.get_double("attractor.t_max"), 1e6);
    ls.seed = stream_seed(cfg.seed, 0x1a00 + i);
    const auto rep = nse_lambda_estimator(model, ms[i], ls);
    if (!rep.delta.selected) {
      ctx.manifest.warn("eps=" + std::to_string(eps[i]) + ": " + rep.reason);
      status = kAssertionFailure;
      continue;
    }
    os << eps[i] << ',' << rep.delta.delta << ',' << rep.lambda.value << ',' << rep.lambda.ci_lo << ','
       << rep.lambda.ci_hi << ',' << rep.mu.p << ',' << rep.mu.ci_lo << ',' << rep.mu.ci_hi << ','
       << (rep.ordering ? 1 : 0) << '\n';
    if (!rep.ordering) status = kAssertionFailure;
  }
  return status;
}

}  // namespace nsldp::cli
