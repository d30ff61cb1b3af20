// Property suite at K=1. Every row is a measured value against a bound;
// the run fails if any row fails.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "commands.hpp"
#include "nsldp/action.hpp"
#include "nsldp/attractor.hpp"
#include "nsldp/reconstruct.hpp"

namespace nsldp::cli {

namespace {

struct Row {
  std::string name;
  double value;
  double bound;
  bool passed;
};

SpectralField random_field(const BasisPtr& b, Rng& rng, double scale = 1.0) {
  SpectralField u(b);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = Complex(rng.normal(), rng.normal()) * scale;
  return u;
}

FlowConfig linear_k1(double dt, double eps) {
  FlowConfig cfg;
  const auto b = BasisSpec::make(1);
  cfg.dt = dt;
  cfg.forcing = SpectralField(b);
  cfg.noise = NoiseSpec::power_law(b);
  cfg.epsilon = eps;
  cfg.nonlinear = false;
  return cfg;
}

std::size_t mode(const BasisPtr& b, int k1, int k2) {
  bool neg = false;
  return static_cast<std::size_t>(b->find({k1, k2}, &neg));
}

double galerkin_energy(Rng& rng) {
  const auto b = BasisSpec::make(1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto u = random_field(b, rng);
    worst = std::max(worst, std::abs(inner(bilinear(u, u), u)) / (norm_h(u) * norm_v(u) * norm_v(u)));
  }
  return worst;
}

double galerkin_antisymmetry(Rng& rng) {
  const auto b = BasisSpec::make(1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto u = random_field(b, rng), v = random_field(b, rng), w = random_field(b, rng);
    const double d = inner(bilinear(u, v), w) + inner(bilinear(u, w), v);
    worst = std::max(worst, std::abs(d) / (norm_h(u) * norm_v(v) * norm_v(w)));
  }
  return worst;
}

double galerkin_collocation(Rng& rng) {
  const auto b = BasisSpec::make(1);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto u = random_field(b, rng), v = random_field(b, rng);
    const auto o = oracle::collocation_bilinear(u, v, 8);
    worst = std::max(worst, distance(bilinear(u, v), o) / std::max(norm_h(o), norm_h(u) * norm_v(v)));
  }
  return worst;
}

// Largest |sample variance - exact| in units of its standard error.
double ou_variance_z() {
  const double eps = 0.1;
  auto cfg = linear_k1(3.0, eps);
  cfg.seed = 77;
  const auto b = cfg.basis();
  const int n = 20000;
  const auto traj = integrate_stochastic(SpectralField(b), cfg, n);
  double worst = 0.0;
  for (std::size_t k = 0; k < b->size(); ++k) {
    const double expect = eps * cfg.noise.b(k) * cfg.noise.b(k) / (2.0 * b->eigenvalue(k));
    for (int part = 0; part < 2; ++part) {
      double s2 = 0.0;
      for (int i = 1; i <= n; ++i) {
        const auto a = traj.states[static_cast<std::size_t>(i)][k];
        const double x = part ? a.imag() : a.real();
        s2 += x * x;
      }
      worst = std::max(worst, std::abs(s2 / n - expect) / (expect * std::sqrt(2.0 / n)));
    }
  }
  return worst;
}

double adjoint_error(Rng& rng) {
  auto cfg = linear_k1(0.05, 0.0);
  cfg.nonlinear = true;
  const auto b = cfg.basis();
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    cfg.forcing = random_field(b, rng, 0.5);
    const auto start = random_field(b, rng, 0.5);
    auto phi = ControlPath::zero(b, 0.25, cfg.dt);
    for (auto& v : phi.values) v = random_field(b, rng, 0.5);
    ReachPenalty pen;
    pen.target = random_field(b, rng);
    pen.radius = 0.1;
    pen.rho = 3.0;
    const auto g = action_gradient(start, phi, cfg, pen);
    const double h = 1e-6;
    for (std::size_t i = 0; i < phi.steps(); ++i)
      for (std::size_t k = 0; k < b->size(); ++k)
        for (int part = 0; part < 2; ++part) {
          const Complex d = part ? Complex(0, h) : Complex(h, 0);
          const Complex saved = phi.values[i][k];
          phi.values[i][k] = saved + d;
          const double fp = action_gradient(start, phi, cfg, pen).value;
          phi.values[i][k] = saved - d;
          const double fm = action_gradient(start, phi, cfg, pen).value;
          phi.values[i][k] = saved;
          const double an = part ? g.control_grad[i][k].imag() : g.control_grad[i][k].real();
          worst = std::max(worst, std::abs((fp - fm) / (2 * h) - an) / std::max(std::abs(an), 1e-2));
        }
  }
  return worst;
}

double linear_quasipotential_error(int threads) {
  const auto cfg = linear_k1(0.01, 0.0);
  const auto b = cfg.basis();
  SpectralField target(b);
  target[mode(b, 1, 0)] = Complex(0.3, 0.0);
  target[mode(b, 1, 1)] = Complex(0.0, 0.1);
  double exact = 0.0;
  for (std::size_t k = 0; k < b->size(); ++k)
    exact += b->eigenvalue(k) * std::norm(target[k]) / (cfg.noise.b(k) * cfg.noise.b(k));
  auto sched = default_schedule(0.0005, 6.0, 6);
  sched.check_horizon_doubling = false;
  sched.threads = threads;
  const auto r = quasipotential(target, {SpectralField(b)}, sched, cfg);
  return r.converged ? std::abs(r.value - exact) / exact : std::numeric_limits<double>::infinity();
}

// Strong full nudging: returns (slope, slope without nudging).
std::pair<double, double> nudging(Rng& rng) {
  auto cfg = linear_k1(1e-3, 0.0);
  cfg.nonlinear = true;
  const auto b = cfg.basis();
  cfg.forcing = random_field(b, rng, 2.0);
  const auto u0 = random_field(b, rng), w0 = random_field(b, rng);
  const auto strong = integrate_coupled(u0, w0, cfg, {50.0, b->size()}, nullptr, 1.0, 10);
  const auto none = integrate_coupled(u0, w0, cfg, {0.0, b->size()}, nullptr, 1.0, 10);
  return {strong.log.decay_slope(), none.log.decay_slope()};
}

// Worst deviation of lambda from mu and of lambda under shifts, constant stopping times.
std::pair<double, double> chain_identities(Rng& rng) {
  double sandwich = 0.0, shift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;
    auto c = random_chain(n, 0, rng);
    c.tau.assign(static_cast<std::size_t>(n), static_cast<int>(rng.next_u64() % 5));
    const auto pi = chain_stationary(c);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const auto rep = sandwich_check(c, pi, 1 + trial % 3, g, g);
    sandwich = std::max(sandwich, std::abs(rep.lambda_closure - rep.mu_closure));
    shift = std::max(shift, shift_invariance_check(c, pi, 1 + trial % 3, g, {1, 2, 5}).max_deviation);
  }
  return {sandwich, shift};
}

// The slowest linear mode decays like e^{-t}; the hit of eta/4 is at ln(4a/eta).
double hitting_time_error() {
  const auto cfg = linear_k1(1e-3, 0.0);
  const auto b = cfg.basis();
  const double a = 1.0, eta = 0.2;
  const auto v = SpectralField::unit(b, mode(b, 1, 0), a);
  const double t = deterministic_hitting_time(v, AttractorSet::singleton(SpectralField(b)), eta, cfg, 50.0);
  return std::abs(t - std::log(4.0 * a / eta));
}

bool config_round_trip(const Config& c) {
  std::stringstream text(c.serialize());
  return Config::parse(text) == c;
}

}  // namespace

int selftest(Context& ctx) {
  Rng rng(stream_seed(static_cast<std::uint64_t>(ctx.config.get_int("run.seed")), 0x5e1f));
  std::vector<Row> rows;
  auto below = [&](const std::string& name, double value, double bound) {
    rows.push_back({name, value, bound, value <= bound});
  };
  below("energy_orthogonality", galerkin_energy(rng), 1e-12);
  below("trilinear_antisymmetry", galerkin_antisymmetry(rng), 1e-12);
  below("collocation_bilinear", galerkin_collocation(rng), 1e-8);
  below("ou_variance_z", ou_variance_z(), 3.0);
  below("adjoint_vs_central_differences", adjoint_error(rng), 1e-4);
  below("linear_quasipotential_rel_error", linear_quasipotential_error(ctx.threads), 0.05);
  const auto [strong, none] = nudging(rng);
  below("nudged_log_distance_slope", strong, -0.9);
  below("nudged_minus_free_slope", strong - none, -1e-9);
  const auto [sandwich, shift] = chain_identities(rng);
  below("chain_lambda_minus_mu", sandwich, 1e-10);
  below("chain_shift_deviation", shift, 1e-10);
  below("hitting_time_error", hitting_time_error(), 2e-3);
  rows.push_back({"config_round_trip", 0.0, 0.0, config_round_trip(ctx.config)});

  std::ofstream os(ctx.manifest.output("selftest.csv"));
  os << std::setprecision(17) << "property,value,bound,passed\n";
  bool ok = true;
  for (const auto& r : rows) {
    os << r.name << ',' << r.value << ',' << r.bound << ',' << (r.passed ? 1 : 0) << '\n';
    std::cout << (r.passed ? "pass " : "FAIL ") << r.name << " = " << r.value << " (bound " << r.bound << ")\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kAssertionFailure;
}

}  // namespace nsldp::cli
