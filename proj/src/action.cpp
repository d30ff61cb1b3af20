#include "nsldp/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "nsldp/errors.hpp"
#include "nsldp/parallel.hpp"

namespace nsldp {

double path_action(const ControlPath& phi, const NoiseSpec& noise) {
  double s = 0.0;
  for (const auto& v : phi.values) {
    const double n = norm_htheta(v, noise);
    s += n * n;
  }
  return 0.5 * phi.dt * s;
}

ControlPath recover_control(const Trajectory& traj, const FlowConfig& cfg) {
  if (traj.size() < 2) throw InvalidArgument("trajectory needs at least two records");
  if (std::abs(traj.dt - cfg.dt) > 1e-9 * cfg.dt)
    throw InvalidArgument("trajectory spacing " + std::to_string(traj.dt) + " differs from integrator step " +
                          std::to_string(cfg.dt));
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (std::abs(traj.times[i] - static_cast<double>(i) * cfg.dt) > 1e-9 * std::max(1.0, traj.times[i]))
      throw InvalidArgument("trajectory grid is not uniform");

  FlowConfig det = cfg;
  det.epsilon = 0.0;
  const ExpEuler stepper(det);
  const auto& E = stepper.decay();
  const auto& W = stepper.weight();
  ControlPath phi;
  phi.dt = cfg.dt;
  phi.values.reserve(traj.size() - 1);
  for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
    const auto& u = traj.states[n];
    const auto& next = traj.states[n + 1];
    SpectralField p = stepper.drift(u, nullptr);  // h - B(u,u)
    for (std::size_t i = 0; i < u.size(); ++i) p[i] = (next[i] - E[i] * u[i]) / W[i] - p[i];
    phi.values.push_back(std::move(p));
  }
  return phi;
}

double action_of_trajectory(const Trajectory& traj, const FlowConfig& cfg) {
  return path_action(recover_control(traj, cfg), cfg.noise);
}

void ActionProblem::validate() const {
  if (starts.empty()) throw InvalidArgument("action problem needs at least one start point");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(horizon > 0.0)) throw InvalidArgument("horizon T must be positive");
  if (!(penalty > 0.0)) throw InvalidArgument("penalty weight rho must be positive");
  if (!(inner_fraction > 0.0 && inner_fraction <= 1.0)) throw InvalidArgument("inner_fraction must be in (0,1]");
  for (const auto& s : starts) s.require_same_basis(target, "action problem");
}

double ReachPenalty::value(const SpectralField& endpoint, SpectralField* grad) const {
  const double d = distance(endpoint, target);
  const double excess = d - radius;
  if (grad) *grad = SpectralField::zero(endpoint.basis());
  if (excess <= 0.0) return 0.0;
  if (grad) {
    *grad = endpoint - target;
    *grad *= 2.0 * rho * excess / d;
  }
  return rho * excess * excess;
}

double ExitPenalty::value(const SpectralField& endpoint, SpectralField* grad) const {
  if (points.empty()) throw InvalidArgument("exit penalty needs attractor points");
  std::size_t best = 0;
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double d = distance(endpoint, points[j]);
    if (d < dmin) {
      dmin = d;
      best = j;
    }
  }
  if (grad) *grad = SpectralField::zero(endpoint.basis());
  const double deficit = radius - dmin;
  if (deficit <= 0.0) return 0.0;
  if (grad && dmin > 0.0) {
    *grad = endpoint - points[best];
    *grad *= -2.0 * rho * deficit / dmin;
  }
  return rho * deficit * deficit;
}

ActionGradient action_gradient(const SpectralField& start, const ControlPath& phi, const FlowConfig& cfg,
                               const TerminalPenalty& penalty) {
  FlowConfig det = cfg;
  det.epsilon = 0.0;
  const ExpEuler stepper(det);
  const auto& E = stepper.decay();
  const auto& W = stepper.weight();
  const std::size_t n = phi.steps();
  const auto& b = cfg.noise.b();

  std::vector<SpectralField> states;
  states.reserve(n + 1);
  states.push_back(start);
  for (std::size_t i = 0; i < n; ++i) {
    SpectralField u = states.back();
    stepper.advance(u, &phi.values[i], nullptr, static_cast<std::int64_t>(i));
    states.push_back(std::move(u));
  }

  ActionGradient out;
  out.action = path_action(phi, cfg.noise);
  SpectralField g;
  out.penalty = penalty.value(states.back(), &g);
  out.value = out.action + out.penalty;
  out.endpoint = states.back();
  out.control_grad.resize(n);

  for (std::size_t i = n; i-- > 0;) {
    SpectralField wg = g;
    for (std::size_t k = 0; k < wg.size(); ++k) wg[k] *= W[k];
    SpectralField cg = wg;
    for (std::size_t k = 0; k < cg.size(); ++k) cg[k] += phi.dt * phi.values[i][k] / (b[k] * b[k]);
    out.control_grad[i] = std::move(cg);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] *= E[k];
    if (cfg.nonlinear) g -= bilinear_linearized_adjoint(states[i], wg);
  }
  out.start_grad = std::move(g);
  return out;
}

namespace {

// Whitened coordinates: phi_{i,k} = b_k z_{i,k} / sqrt(dt), so J_T = |z|^2 / 2.
struct ControlPacking {
  BasisPtr basis;
  std::vector<double> b;
  double dt = 0.0;
  std::size_t steps = 0;

  std::size_t size() const { return steps * basis->size() * 2; }

  ControlPath unpack(const std::vector<double>& z, std::size_t offset = 0) const {
    ControlPath phi;
    phi.dt = dt;
    phi.values.assign(steps, SpectralField(basis));
    const double s = 1.0 / std::sqrt(dt);
    std::size_t j = offset;
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t k = 0; k < basis->size(); ++k, j += 2)
        phi.values[i][k] = Complex(z[j], z[j + 1]) * (b[k] * s);
    return phi;
  }

  void pack(const ControlPath& phi, std::vector<double>& z, std::size_t offset = 0) const {
    const double s = std::sqrt(dt);
    std::size_t j = offset;
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t k = 0; k < basis->size(); ++k, j += 2) {
        const Complex v = phi.values[i][k] * (s / b[k]);
        z[j] = v.real();
        z[j + 1] = v.imag();
      }
  }

  // Chain rule from dObjective/dphi to dObjective/dz.
  void pack_gradient(const std::vector<SpectralField>& g, std::vector<double>& out, std::size_t offset = 0) const {
    const double s = 1.0 / std::sqrt(dt);
    std::size_t j = offset;
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t k = 0; k < basis->size(); ++k, j += 2) {
        out[j] = g[i][k].real() * b[k] * s;
        out[j + 1] = g[i][k].imag() * b[k] * s;
      }
  }
};

std::size_t step_count(double T, double dt) {
  const auto n = static_cast<std::size_t>(std::llround(T / dt));
  if (n == 0) throw InvalidArgument("horizon shorter than one integrator step");
  return n;
}

// Resizes a control to n steps by adding or dropping zero-control time at the front.
ControlPath fit_horizon(const ControlPath& phi, std::size_t n, const BasisPtr& basis, double dt) {
  ControlPath out;
  out.dt = dt;
  if (phi.steps() >= n) {
    out.values.assign(phi.values.end() - static_cast<std::ptrdiff_t>(n), phi.values.end());
  } else {
    out.values.assign(n - phi.steps(), SpectralField(basis));
    out.values.insert(out.values.end(), phi.values.begin(), phi.values.end());
  }
  return out;
}

struct SingleStart {
  ActionResult result;
  double objective = 0.0;
};

SingleStart solve_from(const SpectralField& start, std::size_t start_index, const ActionProblem& p,
                       const FlowConfig& cfg) {
  ControlPacking pk{cfg.basis(), std::vector<double>(cfg.noise.b().begin(), cfg.noise.b().end()), cfg.dt,
                    step_count(p.horizon, cfg.dt)};
  ReachPenalty pen;
  pen.target = p.target;
  pen.radius = p.inner_fraction * p.eta;
  pen.rho = p.penalty;

  std::vector<double> z(pk.size(), 0.0);
  if (p.warm_start) pk.pack(fit_horizon(*p.warm_start, pk.steps, pk.basis, pk.dt), z);

  Objective f = [&](const std::vector<double>& x, std::vector<double>& grad) {
    const ControlPath phi = pk.unpack(x);
    const ActionGradient ag = action_gradient(start, phi, cfg, pen);
    pk.pack_gradient(ag.control_grad, grad);
    return ag.value;
  };
  const OptimizerReport rep = minimize_lbfgs(f, z, p.optimizer);

  SingleStart s;
  auto& r = s.result;
  r.control = pk.unpack(z);
  const ActionGradient final_eval = action_gradient(start, r.control, cfg, pen);
  s.objective = final_eval.value;
  r.value = final_eval.action;
  r.start_index = start_index;
  r.start = start;
  r.endpoint = final_eval.endpoint;
  r.terminal_gap = distance(final_eval.endpoint, p.target);
  r.iterations = rep.iterations;
  r.gradient_norm = rep.gradient_norm;
  r.converged = rep.converged && r.terminal_gap <= p.eta;
  r.diagnostic = rep.message;
  if (rep.converged && r.terminal_gap > p.eta)
    r.diagnostic += "; endpoint outside eta-ball (increase penalty rho)";
  return s;
}

}  // namespace

ActionResult minimize_action(const ActionProblem& problem, const FlowConfig& cfg) {
  problem.validate();
  problem.target.require_same_basis(cfg.forcing, "minimize_action");

  for (std::size_t j = 0; j < problem.starts.size(); ++j) {
    const double d = distance(problem.starts[j], problem.target);
    if (d < problem.eta) {
      ActionResult r;
      r.value = 0.0;
      r.control = ControlPath::zero(cfg.basis(), problem.horizon, cfg.dt);
      r.start_index = j;
      r.start = problem.starts[j];
      r.endpoint = problem.starts[j];
      r.terminal_gap = d;
      r.converged = true;
      r.reached_at_start = true;
      r.diagnostic = "target within eta of a start point";
      return r;
    }
  }

  auto runs = parallel_map(problem.starts.size(), problem.threads,
                           [&](std::size_t j) { return solve_from(problem.starts[j], j, problem, cfg); });

  // feasible (gap <= eta) runs first, then by value, then by start index
  std::size_t best = 0;
  auto key = [&](std::size_t j) {
    const bool feasible = runs[j].result.terminal_gap <= problem.eta;
    return std::make_tuple(!feasible, feasible ? runs[j].result.value : runs[j].objective, j);
  };
  for (std::size_t j = 1; j < runs.size(); ++j)
    if (key(j) < key(best)) best = j;
  return std::move(runs[best].result);
}

QuasipotentialSchedule default_schedule(double eta_final, double horizon, int stages) {
  if (!(eta_final > 0.0) || !(horizon > 0.0) || stages < 1)
    throw InvalidArgument("default_schedule needs eta > 0, T > 0, stages >= 1");
  QuasipotentialSchedule s;
  for (int i = 0; i < stages; ++i) {
    const double eta = eta_final * std::pow(2.0, stages - 1 - i);
    s.stages.push_back({eta, 100.0 / (eta * eta), horizon});
  }
  return s;
}

ActionResult quasipotential(const SpectralField& target, const std::vector<SpectralField>& attractor,
                            const QuasipotentialSchedule& schedule, const FlowConfig& cfg) {
  if (schedule.stages.empty()) throw InvalidArgument("quasipotential schedule is empty");
  for (std::size_t i = 1; i < schedule.stages.size(); ++i) {
    const auto& a = schedule.stages[i - 1];
    const auto& b = schedule.stages[i];
    if (b.eta > a.eta || b.penalty < a.penalty || b.horizon < a.horizon)
      throw InvalidArgument("schedule must have non-increasing eta, non-decreasing rho and T");
  }

  ActionResult result;
  std::optional<ControlPath> warm;
  std::vector<ContinuationStage> trace;
  for (const auto& st : schedule.stages) {
    ActionProblem p;
    p.starts = attractor;
    p.target = target;
    p.eta = st.eta;
    p.penalty = st.penalty;
    p.horizon = st.horizon;
    p.optimizer = schedule.optimizer;
    p.warm_start = warm;
    p.threads = schedule.threads;
    result = minimize_action(p, cfg);
    trace.push_back({st.eta, st.penalty, st.horizon, result.value, result.converged});
    warm = result.control;
  }

  const double abs_tol = 1e-9;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const auto& a = trace[i - 1];
    const auto& b = trace[i];
    const double slack = schedule.tolerance * std::max(a.value, b.value) + abs_tol;
    if (b.eta < a.eta && b.horizon == a.horizon && b.value < a.value - slack) {
      result.monotone = false;
      result.warnings.push_back("optimizer failure: value decreased when eta shrank (stage " + std::to_string(i) +
                                ")");
    }
    if (b.horizon > a.horizon && b.eta == a.eta && b.value > a.value + slack) {
      result.monotone = false;
      result.warnings.push_back("optimizer failure: value increased with a longer horizon (stage " +
                                std::to_string(i) + ")");
    }
  }
  if (trace.size() >= 2) {
    const double a = trace[trace.size() - 2].value, b = trace.back().value;
    result.saturated = std::abs(b - a) <= schedule.tolerance * std::max(std::abs(b), 1e-300) || (a == 0 && b == 0);
  }

  if (schedule.check_horizon_doubling && !result.reached_at_start) {
    const auto& last = schedule.stages.back();
    ActionProblem p;
    p.starts = attractor;
    p.target = target;
    p.eta = last.eta;
    p.penalty = last.penalty;
    p.horizon = 2.0 * last.horizon;
    p.optimizer = schedule.optimizer;
    p.warm_start = result.control;
    p.threads = schedule.threads;
    const ActionResult doubled = minimize_action(p, cfg);
    const double denom = std::max(std::abs(result.value), 1e-300);
    result.horizon_doubling_change = std::abs(doubled.value - result.value) / denom;
    if (doubled.value > result.value * (1.0 + schedule.tolerance) + abs_tol) {
      result.monotone = false;
      result.warnings.push_back("optimizer failure: doubled horizon gave a larger value");
    }
  } else if (result.reached_at_start) {
    result.horizon_doubling_change = 0.0;
  }
  result.continuation_trace = std::move(trace);
  return result;
}

ExitActionResult min_exit_action(double R, double eta, double T, const std::vector<SpectralField>& attractor,
                                 const FlowConfig& cfg, const ExitActionSettings& settings) {
  if (!(R > 0.0) || !(eta > 0.0) || !(T > 0.0)) throw InvalidArgument("min_exit_action needs R, eta, T > 0");
  if (attractor.empty()) throw InvalidArgument("min_exit_action needs attractor points");
  if (settings.starts < 1) throw InvalidArgument("min_exit_action needs at least one start");

  const BasisPtr basis = cfg.basis();
  const std::size_t m = basis->size();
  ControlPacking pk{basis, std::vector<double>(cfg.noise.b().begin(), cfg.noise.b().end()), cfg.dt,
                    step_count(T, cfg.dt)};
  const std::size_t ny = 2 * m;
  ExitPenalty pen;
  pen.points = attractor;
  pen.radius = settings.outer_fraction * eta;
  pen.rho = settings.penalty;

  // u0 = R y / sqrt(1 + |y|^2) maps R^{2m} onto the open ball B_R.
  auto start_of = [&](const std::vector<double>& x) {
    double yy = 0.0;
    for (std::size_t j = 0; j < ny; ++j) yy += x[j] * x[j];
    const double s = R / std::sqrt(1.0 + yy);
    SpectralField u(basis);
    for (std::size_t k = 0; k < m; ++k) u[k] = Complex(x[2 * k], x[2 * k + 1]) * s;
    return u;
  };

  auto run = [&](std::size_t j) {
    std::vector<double> x(ny + pk.size(), 0.0);
    // first start along the slowest mode, the rest in random directions
    Rng rng(stream_seed(settings.seed, j));
    std::vector<double> dir(ny, 0.0);
    if (j == 0) {
      dir[2 * static_cast<std::size_t>(basis->spectral_order().front())] = 1.0;
    } else {
      double nn = 0.0;
      for (auto& d : dir) {
        d = rng.normal();
        nn += d * d;
      }
      for (auto& d : dir) d /= std::sqrt(nn);
    }
    const double radius_frac = 0.9;
    const double ynorm = radius_frac / std::sqrt(1.0 - radius_frac * radius_frac);
    for (std::size_t i = 0; i < ny; ++i) x[i] = ynorm * dir[i];

    Objective f = [&](const std::vector<double>& xv, std::vector<double>& grad) {
      const SpectralField u0 = start_of(xv);
      const ControlPath phi = pk.unpack(xv, ny);
      const ActionGradient ag = action_gradient(u0, phi, cfg, pen);
      pk.pack_gradient(ag.control_grad, grad, ny);
      double yy = 0.0, yg = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        yy += xv[2 * k] * xv[2 * k] + xv[2 * k + 1] * xv[2 * k + 1];
        yg += xv[2 * k] * ag.start_grad[k].real() + xv[2 * k + 1] * ag.start_grad[k].imag();
      }
      const double s = std::sqrt(1.0 + yy);
      for (std::size_t k = 0; k < m; ++k) {
        grad[2 * k] = R * (ag.start_grad[k].real() / s - xv[2 * k] * yg / (s * s * s));
        grad[2 * k + 1] = R * (ag.start_grad[k].imag() / s - xv[2 * k + 1] * yg / (s * s * s));
      }
      return ag.value;
    };
    const OptimizerReport rep = minimize_lbfgs(f, x, settings.optimizer);

    ExitActionResult r;
    r.start = start_of(x);
    r.control = pk.unpack(x, ny);
    const ActionGradient fin = action_gradient(r.start, r.control, cfg, pen);
    r.value = fin.action;
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& a : attractor) dmin = std::min(dmin, distance(fin.endpoint, a));
    r.terminal_distance = dmin;
    r.converged = rep.converged && dmin >= eta;
    r.diagnostic = rep.message;
    if (rep.converged && dmin < eta) r.diagnostic += "; endpoint inside eta-neighbourhood (increase penalty rho)";
    return r;
  };

  auto runs = parallel_map(static_cast<std::size_t>(settings.starts), settings.threads, run);
  std::size_t best = 0;
  auto key = [&](std::size_t j) {
    const bool feasible = runs[j].terminal_distance >= eta;
    return std::make_tuple(!feasible, runs[j].value, j);
  };
  for (std::size_t j = 1; j < runs.size(); ++j)
    if (key(j) < key(best)) best = j;
  ExitActionResult out = std::move(runs[best]);
  out.degenerate = out.value < settings.degenerate_below;
  if (out.degenerate) out.diagnostic += "; exit action not bounded away from zero (increase T)";
  return out;
}

std::string action_result_json(const ActionResult& r) {
  nlohmann::ordered_json j;
  j["value"] = r.value;
  j["terminal_gap"] = r.terminal_gap;
  j["converged"] = r.converged;
  j["reached_at_start"] = r.reached_at_start;
  j["start_index"] = r.start_index;
  j["iterations"] = r.iterations;
  j["gradient_norm"] = r.gradient_norm;
  j["diagnostic"] = r.diagnostic;
  j["monotone"] = r.monotone;
  j["saturated"] = r.saturated;
  if (r.horizon_doubling_change) j["horizon_doubling_change"] = *r.horizon_doubling_change;
  j["warnings"] = r.warnings;
  auto& tr = j["continuation_trace"] = nlohmann::ordered_json::array();
  for (const auto& s : r.continuation_trace)
    tr.push_back({{"eta", s.eta}, {"rho", s.penalty}, {"T", s.horizon}, {"value", s.value}, {"converged", s.converged}});
  return j.dump(2);
}

}  // namespace nsldp
