#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "nsldp/action.hpp"

using namespace nsldp;

namespace {

std::size_t mode_index(const BasisPtr& b, int k1, int k2) {
  bool neg = false;
  return static_cast<std::size_t>(b->find({k1, k2}, &neg));
}

double ou_quasipotential(const SpectralField& u, const NoiseSpec& noise) {
  double v = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k)
    v += u.basis()->eigenvalue(k) * std::norm(u[k]) / (noise.b(k) * noise.b(k));
  return v;
}

ControlPath random_control(const BasisPtr& b, double T, double dt, Rng& rng, double scale) {
  auto phi = ControlPath::zero(b, T, dt);
  for (auto& v : phi.values) v = fixture::random_field(b, rng, scale);
  return phi;
}

}  // namespace

TEST_CASE("path action") {
  auto cfg = fixture::linear_config(2, 0.01);
  const auto b = cfg.basis();
  CHECK(path_action(ControlPath::zero(b, 1.0, 0.01), cfg.noise) == 0.0);
  for (std::size_t j : {std::size_t{0}, std::size_t{5}}) {
    const auto phi = ControlPath::constant(SpectralField::unit(b, j), 2.0, 0.01);
    CHECK(path_action(phi, cfg.noise) == doctest::Approx(2.0 / (2.0 * cfg.noise.b(j) * cfg.noise.b(j))).epsilon(1e-12));
  }
  Rng rng(1);
  const auto phi = random_control(b, 1.0, 0.01, rng, 0.3);
  double rev = 0.0;
  for (std::size_t i = phi.steps(); i-- > 0;)
    for (std::size_t k = b->size(); k-- > 0;) rev += std::norm(phi.values[i][k]) / (cfg.noise.b(k) * cfg.noise.b(k));
  rev *= 0.5 * phi.dt;
  CHECK(path_action(phi, cfg.noise) == doctest::Approx(rev).epsilon(1e-12));
}

TEST_CASE("action of a recorded trajectory") {
  auto cfg = fixture::nonlinear_config(2, 1e-3);
  Rng rng(2);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng);

  const auto det = integrate_deterministic(u0, cfg, 500);
  CHECK(action_of_trajectory(det, cfg) <= 1e-10);

  const auto phi = random_control(cfg.basis(), 0.5, cfg.dt, rng, 0.2);
  auto traj = integrate_controlled(u0, cfg, phi);
  const double J = path_action(phi, cfg.noise);
  CHECK(action_of_trajectory(traj, cfg) == doctest::Approx(J).epsilon(1e-8));

  traj.states[200][3] += Complex(1e-3, 0.0);
  const double corrupted = action_of_trajectory(traj, cfg);
  CHECK(std::isfinite(corrupted));
  CHECK(corrupted > J);

  auto wrong = cfg;
  wrong.dt = 2e-3;
  CHECK_THROWS(action_of_trajectory(traj, wrong));
}

TEST_CASE("adjoint gradient agrees with central differences") {
  for (bool nonlinear : {false, true}) {
    auto cfg = fixture::nonlinear_config(1, 0.05);
    cfg.nonlinear = nonlinear;
    const auto b = cfg.basis();
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      cfg.forcing = fixture::random_field(b, rng, 0.5);
      const auto start = fixture::random_field(b, rng, 0.5);
      auto phi = random_control(b, 0.25, cfg.dt, rng, 0.5);
      REQUIRE(phi.steps() == 5);
      ReachPenalty reach;
      reach.target = fixture::random_field(b, rng, 1.0);
      reach.radius = 0.1;
      reach.rho = 3.0;
      ExitPenalty exit;
      exit.points = {fixture::random_field(b, rng, 0.2), fixture::random_field(b, rng, 0.2)};
      exit.radius = 5.0;
      exit.rho = 2.0;
      for (const TerminalPenalty* pen : {static_cast<const TerminalPenalty*>(&reach),
                                         static_cast<const TerminalPenalty*>(&exit)}) {
        const auto g = action_gradient(start, phi, cfg, *pen);
        REQUIRE(g.penalty > 0.0);
        const double h = 1e-6;
        auto fd_check = [&](Complex& slot, Complex grad) {
          for (int part = 0; part < 2; ++part) {
            const Complex d = part ? Complex(0, h) : Complex(h, 0);
            const Complex saved = slot;
            slot = saved + d;
            const double fp = action_gradient(start, phi, cfg, *pen).value;
            slot = saved - d;
            const double fm = action_gradient(start, phi, cfg, *pen).value;
            slot = saved;
            const double fd = (fp - fm) / (2 * h);
            const double an = part ? grad.imag() : grad.real();
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(an), 1e-2));
          }
        };
        for (std::size_t i = 0; i < phi.steps(); ++i)
          for (std::size_t k = 0; k < b->size(); ++k) fd_check(phi.values[i][k], g.control_grad[i][k]);
        auto s = start;
        for (std::size_t k = 0; k < b->size(); ++k) {
          const Complex saved = s[k];
          for (int part = 0; part < 2; ++part) {
            const Complex d = part ? Complex(0, h) : Complex(h, 0);
            s[k] = saved + d;
            const double fp = action_gradient(s, phi, cfg, *pen).value;
            s[k] = saved - d;
            const double fm = action_gradient(s, phi, cfg, *pen).value;
            s[k] = saved;
            const double fd = (fp - fm) / (2 * h);
            const double an = part ? g.start_grad[k].imag() : g.start_grad[k].real();
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(an), 1e-2));
          }
        }
      }
    }
  }
}

TEST_CASE("target on the start set costs nothing") {
  auto cfg = fixture::nonlinear_config(2, 0.01);
  Rng rng(4);
  const auto ustar = fixture::smooth_field(cfg.basis(), rng, 0.3);
  ActionProblem p;
  p.starts = {fixture::smooth_field(cfg.basis(), rng), ustar};
  p.target = ustar;
  p.eta = 0.05;
  p.horizon = 1.0;
  const auto r = minimize_action(p, cfg);
  CHECK(r.value == 0.0);
  CHECK(r.converged);
  CHECK(r.start_index == 1);
  for (const auto& v : r.control.values) CHECK(norm_h(v) == 0.0);

  p.starts = {fixture::smooth_field(cfg.basis(), rng, 0.3)};
  auto offset = fixture::random_field(cfg.basis(), rng);
  offset *= 0.5 * p.eta / norm_h(offset);
  p.target = p.starts[0] + offset;
  CHECK(std::abs(minimize_action(p, cfg).value) <= 1e-6);
}

TEST_CASE("linear quasipotential matches the OU formula") {
  auto cfg = fixture::linear_config(1, 0.01);
  const auto b = cfg.basis();
  SpectralField ustar(b);
  ustar[mode_index(b, 1, 0)] = Complex(0.3, 0.0);
  ustar[mode_index(b, 1, 1)] = Complex(0.0, 0.1);
  const double exact = ou_quasipotential(ustar, cfg.noise);

  auto sched = default_schedule(0.0005, 6.0, 6);
  sched.check_horizon_doubling = false;
  const auto r = quasipotential(ustar, {SpectralField(b)}, sched, cfg);
  CHECK(r.converged);
  CHECK(r.terminal_gap <= 0.0005);
  CHECK(r.value == doctest::Approx(exact).epsilon(0.05));
  CHECK(r.monotone);
  // successive eta halvings settle
  const auto& tr = r.continuation_trace;
  REQUIRE(tr.size() == 6);
  CHECK(std::abs(tr[5].value - tr[4].value) <= 0.01 * tr[5].value);

  const auto r2 = quasipotential(2.0 * ustar, {SpectralField(b)}, sched, cfg);
  CHECK(r2.value / r.value == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("quasipotential trace vanishes on the attractor") {
  auto cfg = fixture::linear_config(1, 0.01);
  const auto b = cfg.basis();
  const auto r = quasipotential(SpectralField(b), {SpectralField(b)}, default_schedule(0.01, 2.0, 3), cfg);
  for (const auto& s : r.continuation_trace) CHECK(s.value == 0.0);
  CHECK(r.horizon_doubling_change.value() == 0.0);
}

TEST_CASE("horizon doubling is self-consistent") {
  auto cfg = fixture::linear_config(1, 0.02);
  const auto b = cfg.basis();
  SpectralField ustar(b);
  ustar[mode_index(b, 1, 0)] = Complex(0.2, 0.1);
  auto sched = default_schedule(0.004, 5.0, 3);
  const auto r = quasipotential(ustar, {SpectralField(b)}, sched, cfg);
  REQUIRE(r.horizon_doubling_change.has_value());
  CHECK(*r.horizon_doubling_change < 0.02);
  CHECK(r.monotone);
}

TEST_CASE("linear exit action approaches the cheapest-mode formula") {
  auto cfg = fixture::linear_config(1, 0.02);
  const auto b = cfg.basis();
  double cheapest = 1e300;
  for (std::size_t k = 0; k < b->size(); ++k)
    cheapest = std::min(cheapest, b->eigenvalue(k) / (cfg.noise.b(k) * cfg.noise.b(k)));
  ExitActionSettings s;
  s.starts = 3;
  s.outer_fraction = 1.01;
  const std::vector<SpectralField> origin{SpectralField(b)};

  const double eta = 0.2;
  const auto a = min_exit_action(1.0, eta, 6.0, origin, cfg, s);
  CHECK(a.converged);
  CHECK_FALSE(a.degenerate);
  CHECK(a.value == doctest::Approx(cheapest * eta * eta).epsilon(0.10));
  const auto a2 = min_exit_action(1.0, eta, 12.0, origin, cfg, s);
  CHECK(std::abs(a2.value - a.value) <= 0.10 * a.value);

  double prev = a.value;
  for (double e : {0.1, 0.05, 0.025}) {
    const auto ae = min_exit_action(1.0, e, 6.0, origin, cfg, s);
    CHECK(ae.value <= prev);
    prev = ae.value;
  }
}
