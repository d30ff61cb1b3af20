#include "nsldp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>

#include "nsldp/errors.hpp"

namespace nsldp {

SpectralField default_forcing(const BasisPtr& basis, double amplitude) {
  SpectralField h(basis);
  const std::pair<Wavevector, Complex> terms[] = {{{1, 0}, Complex(amplitude, 0.0)},
                                                  {{1, 1}, Complex(0.0, amplitude)},
                                                  {{2, -1}, Complex(0.5 * amplitude, 0.5 * amplitude)}};
  for (const auto& [k, a] : terms) {
    bool neg = false;
    const auto i = basis->find(k, &neg);
    if (i < 0) continue;
    h[static_cast<std::size_t>(i)] = neg ? -std::conj(a) : a;
  }
  return h;
}

void FlowConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("flow dt must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("noise amplitude eps must be >= 0");
  if (!forcing.basis()) throw InvalidArgument("flow forcing has no basis");
  if (!noise.basis()) throw InvalidArgument("flow noise spec has no basis");
  if (noise.basis()->cutoff() != forcing.basis()->cutoff())
    throw InvalidArgument("forcing and noise live on different bases");
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_ >> normal_;
  if (!is) throw InvalidArgument("corrupt RNG state");
}

ExpEuler::ExpEuler(const FlowConfig& cfg) : forcing_(cfg.forcing), nonlinear_(cfg.nonlinear), dt_(cfg.dt) {
  cfg.validate();
  const auto& lam = cfg.basis()->eigenvalues();
  const std::size_t m = lam.size();
  decay_.resize(m);
  weight_.resize(m);
  noise_std_.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double em1 = std::expm1(-lam[i] * dt_);
    decay_[i] = 1.0 + em1;
    weight_[i] = -em1 / lam[i];
    if (cfg.epsilon > 0.0) {
      const double b = cfg.noise.b(i);
      noise_std_[i] = std::sqrt(cfg.epsilon * b * b * (-std::expm1(-2.0 * lam[i] * dt_)) / (2.0 * lam[i]));
    }
  }
}

SpectralField ExpEuler::drift(const SpectralField& u, const SpectralField* phi) const {
  SpectralField f = forcing_;
  if (phi) f += *phi;
  if (nonlinear_) f -= bilinear(u, u);
  return f;
}

void check_finite(const SpectralField& u, std::int64_t step_index) {
  for (auto a : u.amps()) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw NumericalBlowup("non-finite amplitude; reduce dt", step_index);
    if (std::abs(a) > kBlowupThreshold)
      throw NumericalBlowup("amplitude exceeded blowup threshold; reduce dt", step_index);
  }
}

void ExpEuler::advance(SpectralField& u, const SpectralField* phi, Rng* rng, std::int64_t step_index) const {
  u.require_same_basis(forcing_, "advance");
  const SpectralField f = drift(u, phi);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = decay_[i] * u[i] + weight_[i] * f[i];
  if (rng) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (noise_std_[i] == 0.0) continue;
      const double re = rng->normal();
      const double im = rng->normal();
      u[i] += noise_std_[i] * Complex(re, im);
    }
  }
  check_finite(u, step_index);
}

SpectralField step_deterministic(const SpectralField& u, const FlowConfig& cfg, std::int64_t step_index) {
  SpectralField out = u;
  ExpEuler(cfg).advance(out, nullptr, nullptr, step_index);
  return out;
}

SpectralField step_stochastic(const SpectralField& u, const FlowConfig& cfg, Rng& rng, std::int64_t step_index) {
  SpectralField out = u;
  ExpEuler(cfg).advance(out, nullptr, cfg.epsilon > 0.0 ? &rng : nullptr, step_index);
  return out;
}

SpectralField step_controlled(const SpectralField& u, const FlowConfig& cfg, const SpectralField& phi,
                              std::int64_t step_index) {
  u.require_same_basis(phi, "step_controlled");
  SpectralField out = u;
  ExpEuler(cfg).advance(out, &phi, nullptr, step_index);
  return out;
}

ControlPath ControlPath::zero(BasisPtr basis, double T, double dt) {
  return constant(SpectralField::zero(std::move(basis)), T, dt);
}

ControlPath ControlPath::constant(const SpectralField& phi, double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw InvalidArgument("control path needs T > 0 and dt > 0");
  const auto n = static_cast<std::size_t>(std::llround(T / dt));
  if (n == 0) throw InvalidArgument("control path shorter than one step");
  ControlPath p;
  p.dt = dt;
  p.values.assign(n, phi);
  return p;
}

void ControlPath::validate() const {
  if (!(dt > 0.0)) throw InvalidArgument("control path dt must be positive");
  if (values.empty()) throw InvalidArgument("control path is empty");
  for (const auto& v : values) v.require_same_basis(values.front(), "ControlPath");
}

void write_control_csv(std::ostream& os, const ControlPath& phi) {
  os << "step,t,k1,k2,re,im\n";
  std::ostringstream line;
  line << std::setprecision(17);
  const auto& modes = phi.basis()->modes();
  for (std::size_t s = 0; s < phi.steps(); ++s) {
    for (std::size_t i = 0; i < modes.size(); ++i) {
      line.str({});
      line << s << ',' << phi.dt * static_cast<double>(s) << ',' << modes[i].k1 << ',' << modes[i].k2 << ','
           << phi.values[s][i].real() << ',' << phi.values[s][i].imag() << '\n';
      os << line.str();
    }
  }
}

ControlPath read_control_csv(std::istream& is, BasisPtr basis) {
  ControlPath p;
  std::string line;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (line.empty() || line.rfind("step", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::size_t s = 0;
    double t = 0, re = 0, im = 0;
    Wavevector k;
    if (!(ls >> s >> t >> k.k1 >> k.k2 >> re >> im)) throw InvalidArgument("malformed control record");
    if (s >= p.values.size()) {
      p.values.resize(s + 1, SpectralField(basis));
      times.resize(s + 1, t);
    }
    const int idx = basis->find(k);
    bool neg = false;
    basis->find(k, &neg);
    if (idx < 0 || neg) throw InvalidArgument("control record with foreign wavevector");
    p.values[s][static_cast<std::size_t>(idx)] = {re, im};
  }
  if (p.values.size() >= 2) p.dt = times[1] - times[0];
  if (p.values.empty()) throw InvalidArgument("empty control file");
  return p;
}

void Trajectory::push(double t, const SpectralField& u) {
  times.push_back(t);
  states.push_back(u);
  observables.push_back({norm_h(u), norm_v(u)});
}

namespace {

Trajectory run(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps, std::int64_t record_every,
               const ControlPath* phi, Rng* rng) {
  if (steps < 0) throw InvalidArgument("negative step count");
  if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
  u0.require_same_basis(cfg.forcing, "integrate");
  const ExpEuler stepper(cfg);
  Trajectory traj;
  traj.dt = cfg.dt * static_cast<double>(record_every);
  traj.push(0.0, u0);
  SpectralField u = u0;
  for (std::int64_t n = 0; n < steps; ++n) {
    const SpectralField* p = phi ? &phi->values[static_cast<std::size_t>(n)] : nullptr;
    stepper.advance(u, p, rng, n);
    if ((n + 1) % record_every == 0) traj.push(cfg.dt * static_cast<double>(n + 1), u);
  }
  return traj;
}

}  // namespace

Trajectory integrate_deterministic(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps,
                                   std::int64_t record_every) {
  return run(u0, cfg, steps, record_every, nullptr, nullptr);
}

Trajectory integrate_stochastic(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps,
                                std::int64_t record_every, Rng* rng) {
  Rng local(cfg.seed);
  Rng* r = rng ? rng : &local;
  return run(u0, cfg, steps, record_every, nullptr, cfg.epsilon > 0.0 ? r : nullptr);
}

Trajectory integrate_controlled(const SpectralField& u0, const FlowConfig& cfg, const ControlPath& phi) {
  phi.validate();
  if (std::abs(phi.dt - cfg.dt) > 1e-12 * cfg.dt)
    throw InvalidArgument("control step differs from integrator step");
  return run(u0, cfg, static_cast<std::int64_t>(phi.steps()), 1, &phi, nullptr);
}

SpectralField flow_map(const SpectralField& u0, const FlowConfig& cfg, std::int64_t steps, const ControlPath* phi,
                       Rng* rng) {
  if (phi && static_cast<std::int64_t>(phi->steps()) < steps) throw InvalidArgument("control path too short");
  const ExpEuler stepper(cfg);
  SpectralField u = u0;
  for (std::int64_t n = 0; n < steps; ++n)
    stepper.advance(u, phi ? &phi->values[static_cast<std::size_t>(n)] : nullptr,
                    cfg.epsilon > 0.0 ? rng : nullptr, n);
  return u;
}

void CouplingConfig::validate() const {
  if (!(gain >= 0.0) || !std::isfinite(gain)) throw InvalidArgument("coupling gain must be >= 0");
}

double ContractionLog::decay_slope(double floor_rel) const {
  if (distance.empty() || distance.front() <= 0.0) return 0.0;
  const double floor = floor_rel * distance.front();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < distance.size(); ++i) {
    if (!(distance[i] > floor)) break;
    const double y = std::log(distance[i]);
    sx += times[i];
    sy += y;
    sxx += times[i] * times[i];
    sxy += times[i] * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

CoupledRun integrate_coupled(const SpectralField& u0, const SpectralField& w0, const FlowConfig& cfg,
                             const CouplingConfig& coupling, const ControlPath* phi, double T,
                             std::int64_t record_every) {
  coupling.validate();
  u0.require_same_basis(w0, "integrate_coupled");
  u0.require_same_basis(cfg.forcing, "integrate_coupled");
  if (!(T > 0.0)) throw InvalidArgument("coupled horizon T must be positive");
  if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
  const auto steps = static_cast<std::int64_t>(std::llround(T / cfg.dt));
  if (phi) {
    phi->validate();
    if (std::abs(phi->dt - cfg.dt) > 1e-12 * cfg.dt) throw InvalidArgument("control step differs from dt");
    if (static_cast<std::int64_t>(phi->steps()) < steps) throw InvalidArgument("control path shorter than T");
  }

  const ExpEuler stepper(cfg);
  const auto mask = low_mode_mask(*u0.basis(), coupling.modes);
  const auto& E = stepper.decay();
  const auto& W = stepper.weight();

  CoupledRun run;
  run.reference.dt = run.nudged.dt = cfg.dt * static_cast<double>(record_every);
  SpectralField u = u0, w = w0;
  double grad_int = 0.0;
  auto record = [&](double t) {
    run.reference.push(t, u);
    run.nudged.push(t, w);
    run.log.times.push_back(t);
    run.log.distance.push_back(distance(u, w));
    run.log.grad_integral.push_back(grad_int);
  };
  record(0.0);

  for (std::int64_t n = 0; n < steps; ++n) {
    const SpectralField* p = phi ? &phi->values[static_cast<std::size_t>(n)] : nullptr;
    SpectralField fw = stepper.drift(w, p);
    for (std::size_t i = 0; i < w.size(); ++i)
      if (mask[i]) fw[i] += coupling.gain * (u[i] - w[i]);
    const double vu = norm_v(u);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = E[i] * w[i] + W[i] * fw[i];
    check_finite(w, n);
    stepper.advance(u, p, nullptr, n);
    grad_int += cfg.dt * vu * vu;
    if ((n + 1) % record_every == 0) record(cfg.dt * static_cast<double>(n + 1));
  }
  return run;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,norm_h,norm_v\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    line.str({});
    line << traj.times[i] << ',' << traj.observables[i].norm_h << ',' << traj.observables[i].norm_v << '\n';
    os << line.str();
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write checkpoint " + path);
  os << std::setprecision(17);
  os << "# nsldp checkpoint\n";
  os << "step " << cp.step << "\n";
  os << "time " << cp.time << "\n";
  os << "rng " << cp.rng_state << "\n";
  os << "state\n";
  write_field_csv(os, cp.state);
}

Checkpoint load_checkpoint(const std::string& path, BasisPtr basis) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open checkpoint " + path);
  Checkpoint cp;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "state") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "step") ls >> cp.step;
    else if (key == "time") ls >> cp.time;
    else if (key == "rng") std::getline(ls >> std::ws, cp.rng_state);
    else throw InvalidArgument("unknown checkpoint entry '" + key + "'");
  }
  cp.state = read_field_csv(is, std::move(basis));
  return cp;
}

DeviationSample deviation_sample(const SpectralField& u0, const ControlPath& phi, const FlowConfig& cfg,
                                 std::int64_t record_every) {
  phi.validate();
  if (record_every < 1) throw InvalidArgument("record_every must be at least 1");
  const ExpEuler stepper(cfg);
  const double l1 = cfg.basis()->lambda1();
  const double decay = std::exp(-l1 * cfg.dt);
  const double gain = (1.0 - decay) / l1;
  const double h2 = norm_h(cfg.forcing) * norm_h(cfg.forcing);
  const double u2 = norm_h(u0) * norm_h(u0);
  SpectralField free = u0, driven = u0;
  double integral = 0.0;
  DeviationSample out;
  for (std::size_t n = 0; n < phi.steps(); ++n) {
    const auto i = static_cast<std::int64_t>(n);
    stepper.advance(free, nullptr, nullptr, i);
    stepper.advance(driven, &phi.values[n], nullptr, i);
    const double p = norm_h(phi.values[n]);
    integral = decay * integral + gain * p * p;
    if ((i + 1) % record_every != 0) continue;
    const double t = static_cast<double>(i + 1) * cfg.dt;
    const double d = distance(driven, free);
    out.times.push_back(t);
    out.deviation2.push_back(d * d);
    out.integral.push_back(integral);
    out.exponent.push_back(u2 + t * h2);
  }
  return out;
}

DeviationFit fit_deviation_bound(const std::vector<DeviationSample>& samples) {
  std::vector<double> x, y;
  for (const auto& s : samples)
    for (std::size_t i = 0; i < s.times.size(); ++i)
      if (s.deviation2[i] > 0.0 && s.integral[i] > 0.0) {
        x.push_back(s.exponent[i]);
        y.push_back(std::log(s.deviation2[i] / s.integral[i]));
      }
  if (x.empty()) throw InvalidArgument("fit_deviation_bound: no sample with a nonzero deviation");
  // the mean gap is convex and piecewise linear in c, so its minimum sits at
  // c = 0 or at a slope between two points
  auto envelope = [&](double c) {
    double a = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) a = std::max(a, y[i] - c * x[i]);
    return a;
  };
  auto gap = [&](double c) {
    const double a = envelope(c);
    double g = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) g += a + c * x[i] - y[i];
    return g;
  };
  // envelope vertices only: points that are maximal for some c >= 0
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && y[a] > y[b]); });
  std::vector<std::size_t> hull;
  double top = -std::numeric_limits<double>::infinity();
  for (auto i : order) {
    if (y[i] <= top) continue;  // a point left of it is higher: dominated for every c >= 0
    top = y[i];
    while (hull.size() >= 2) {
      const auto a = hull[hull.size() - 2], b = hull.back();
      if ((y[b] - y[a]) * (x[i] - x[a]) <= (y[i] - y[a]) * (x[b] - x[a])) hull.pop_back();
      else break;
    }
    hull.push_back(i);
  }
  double best_c = 0.0, best = gap(0.0);
  for (std::size_t k = 1; k < hull.size(); ++k) {
    const auto a = hull[k - 1], b = hull[k];
    const double c = (y[b] - y[a]) / (x[b] - x[a]);
    if (c > 0.0 && gap(c) < best) {
      best = gap(c);
      best_c = c;
    }
  }
  return {std::exp(envelope(best_c)), best_c, x.size()};
}

double deviation_bound_ratio(const DeviationSample& s, const DeviationFit& fit) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    if (!(s.deviation2[i] > 0.0)) continue;
    const double bound = fit.C * std::exp(fit.c * s.exponent[i]) * s.integral[i];
    worst = std::min(worst, bound / s.deviation2[i]);
  }
  return worst;
}

}  // namespace nsldp
