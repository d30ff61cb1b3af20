#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "fixtures.hpp"
#include "nsldp/errors.hpp"
#include "nsldp/flow.hpp"

using namespace nsldp;

namespace {

std::size_t mode_index(const BasisPtr& b, int k1, int k2) {
  bool neg = false;
  return static_cast<std::size_t>(b->find({k1, k2}, &neg));
}

}  // namespace

TEST_CASE("linear decay of the slowest mode is exact") {
  auto cfg = fixture::linear_config(2, 1e-2);
  const auto b = cfg.basis();
  const auto i10 = mode_index(b, 1, 0);
  const auto u = flow_map(SpectralField::unit(b, i10), cfg, 300);
  CHECK(norm_h(u) == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("manufactured equilibrium is a fixed point") {
  auto cfg = fixture::nonlinear_config(3, 1e-3);
  Rng rng(21);
  const auto ustar = fixture::smooth_field(cfg.basis(), rng, 0.1);
  cfg.forcing = stokes_apply(ustar) + bilinear(ustar, ustar);
  const auto traj = integrate_deterministic(ustar, cfg, 10000, 500);
  for (const auto& s : traj.states) CHECK(distance(s, ustar) <= 1e-8);
}

TEST_CASE("first-order convergence under dt refinement") {
  auto cfg = fixture::nonlinear_config(2);
  Rng rng(22);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng, 1.0);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng, 1.0);
  auto run = [&](double dt) {
    auto c = cfg;
    c.dt = dt;
    return flow_map(u0, c, std::llround(1.0 / dt));
  };
  const auto a = run(0.02), b = run(0.01), c = run(0.005);
  const double ratio = distance(a, b) / distance(b, c);
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
}

TEST_CASE("zero noise reproduces the deterministic step bit for bit") {
  auto cfg = fixture::nonlinear_config(2);
  Rng rng(23);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  auto u = fixture::smooth_field(cfg.basis(), rng);
  Rng stream(5);
  for (int n = 0; n < 50; ++n) {
    const auto d = step_deterministic(u, cfg, n);
    const auto s = step_stochastic(u, cfg, stream, n);
    const auto c = step_controlled(u, cfg, SpectralField(cfg.basis()), n);
    for (std::size_t i = 0; i < u.size(); ++i) {
      CHECK(d[i] == s[i]);
      CHECK(d[i] == c[i]);
    }
    u = d;
  }
}

TEST_CASE("linear stationary variance matches the OU law") {
  const double eps = 0.1;
  // the linear OU increment is exact at any step, so a long step gives
  // nearly independent samples
  auto cfg = fixture::linear_config(1, 3.0, eps);
  cfg.seed = 77;
  const auto b = cfg.basis();
  const int n = 20000;
  const auto traj = integrate_stochastic(SpectralField(b), cfg, n);
  for (std::size_t k = 0; k < b->size(); ++k) {
    const double expect = eps * cfg.noise.b(k) * cfg.noise.b(k) / (2.0 * b->eigenvalue(k));
    for (int part = 0; part < 2; ++part) {
      double s2 = 0.0, s1 = 0.0;
      for (int i = 1; i <= n; ++i) {
        const auto a = traj.states[static_cast<std::size_t>(i)][k];
        const double x = part ? a.imag() : a.real();
        s1 += x;
        s2 += x * x;
      }
      const double var = s2 / n;
      const double se = expect * std::sqrt(2.0 / n);
      CHECK(std::abs(var - expect) <= 3.0 * se);
      CHECK(std::abs(s1 / n) <= 3.0 * std::sqrt(expect / n));
    }
  }
}

TEST_CASE("same seed gives identical trajectories") {
  auto cfg = fixture::nonlinear_config(2, 1e-3, 0.05);
  cfg.seed = 99;
  Rng rng(1);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng);
  const auto a = integrate_stochastic(u0, cfg, 500, 10);
  const auto b = integrate_stochastic(u0, cfg, 500, 10);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < u0.size(); ++k) CHECK(a.states[i][k] == b.states[i][k]);
  cfg.seed = 100;
  const auto c = integrate_stochastic(u0, cfg, 500, 10);
  CHECK(distance(a.states.back(), c.states.back()) > 0.0);
}

TEST_CASE("constant control on a single linear mode") {
  auto cfg = fixture::linear_config(2, 1e-2);
  const auto b = cfg.basis();
  const auto k = mode_index(b, 1, 1);
  const double lambda = b->eigenvalue(k);
  const Complex x0(0.3, -0.1), phi(0.7, 0.2);
  SpectralField u0(b), p(b);
  u0[k] = x0;
  p[k] = phi;
  const auto path = ControlPath::constant(p, 2.0, cfg.dt);
  const auto traj = integrate_controlled(u0, cfg, path);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    const Complex expect = x0 * std::exp(-lambda * t) + phi * (1.0 - std::exp(-lambda * t)) / lambda;
    CHECK(std::abs(traj.states[i][k] - expect) <= 1e-8);
  }
}

TEST_CASE("energy decays at rate lambda_1 without forcing") {
  auto cfg = fixture::nonlinear_config(3, 1e-3);
  Rng rng(31);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng, 2.0);
  const auto traj = integrate_deterministic(u0, cfg, 3000, 100);
  for (std::size_t i = 0; i < traj.size(); ++i)
    CHECK(traj.observables[i].norm_h <= std::exp(-traj.times[i]) * norm_h(u0) * (1.0 + 1e-2));
}

TEST_CASE("discrete energy balance holds to first order") {
  auto cfg = fixture::nonlinear_config(2, 1e-4);
  Rng rng(32);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  auto u = fixture::smooth_field(cfg.basis(), rng);
  for (int n = 0; n < 20; ++n) {
    const auto next = step_deterministic(u, cfg, n);
    const double lhs = (norm_h(next) * norm_h(next) - norm_h(u) * norm_h(u)) / cfg.dt;
    const double rhs = -2.0 * norm_v(u) * norm_v(u) + 2.0 * inner(cfg.forcing, u);
    CHECK(std::abs(lhs - rhs) <= 50.0 * cfg.dt * (1.0 + std::abs(rhs)));
    u = next;
  }
}

TEST_CASE("blowup is reported with the step index") {
  auto cfg = fixture::nonlinear_config(3, 0.5);
  Rng rng(33);
  const auto u0 = fixture::random_field(cfg.basis(), rng, 1e3);
  try {
    flow_map(u0, cfg, 1000);
    FAIL("expected blowup");
  } catch (const NumericalBlowup& e) {
    CHECK(e.step() >= 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("identical starts stay coupled exactly") {
  auto cfg = fixture::nonlinear_config(2, 1e-3);
  Rng rng(41);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng);
  const auto run = integrate_coupled(u0, u0, cfg, {5.0, 3}, nullptr, 2.0, 10);
  for (double d : run.log.distance) CHECK(d == 0.0);
}

TEST_CASE("strong full nudging contracts faster than no nudging") {
  auto cfg = fixture::nonlinear_config(2, 1e-3);
  Rng rng(42);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng, 2.0);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng);
  const auto w0 = fixture::smooth_field(cfg.basis(), rng);
  const auto strong = integrate_coupled(u0, w0, cfg, {50.0, cfg.basis()->size()}, nullptr, 1.0, 10);
  const auto none = integrate_coupled(u0, w0, cfg, {0.0, cfg.basis()->size()}, nullptr, 1.0, 10);
  CHECK(strong.log.decay_slope() <= -0.9);
  CHECK(strong.log.decay_slope() < none.log.decay_slope());
  CHECK(strong.log.grad_integral.back() > 0.0);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run") {
  auto cfg = fixture::nonlinear_config(2, 1e-3, 0.05);
  cfg.seed = 5;
  Rng rng(43);
  cfg.forcing = fixture::smooth_field(cfg.basis(), rng);
  const auto u0 = fixture::smooth_field(cfg.basis(), rng);
  const auto full = integrate_stochastic(u0, cfg, 400, 400);

  Rng stream(cfg.seed);
  const auto half = integrate_stochastic(u0, cfg, 200, 200, &stream);
  const auto path = (std::filesystem::temp_directory_path() / "nsldp_ckpt_test.txt").string();
  save_checkpoint(path, {200, 0.2, half.states.back(), stream.state()});
  const auto cp = load_checkpoint(path);
  std::remove(path.c_str());
  Rng resumed;
  resumed.restore(cp.rng_state);
  const auto rest = integrate_stochastic(cp.state, cfg, 200, 200, &resumed);
  for (std::size_t k = 0; k < u0.size(); ++k) CHECK(rest.states.back()[k] == full.states.back()[k]);
}

TEST_CASE("control csv round trip") {
  auto cfg = fixture::linear_config(1, 0.1);
  Rng rng(44);
  ControlPath phi = ControlPath::zero(cfg.basis(), 0.5, 0.1);
  for (auto& v : phi.values) v = fixture::random_field(cfg.basis(), rng);
  std::stringstream ss;
  write_control_csv(ss, phi);
  const auto back = read_control_csv(ss, cfg.basis());
  REQUIRE(back.steps() == phi.steps());
  CHECK(back.dt == phi.dt);
  for (std::size_t i = 0; i < phi.steps(); ++i)
    for (std::size_t k = 0; k < cfg.basis()->size(); ++k) CHECK(back.values[i][k] == phi.values[i][k]);
}

TEST_CASE("deviation bound: linear constant and fitted envelope") {
  // linear flow, h = 0: Cauchy-Schwarz gives |d(t)|^2 <= I(t) / lambda_1
  auto cfg = fixture::linear_config(2, 1e-2);
  const auto b = cfg.basis();
  Rng rng(21);
  std::vector<DeviationSample> samples;
  for (int i = 0; i < 10; ++i) {
    auto phi = ControlPath::zero(b, 2.0, cfg.dt);
    for (auto& v : phi.values) v = fixture::random_field(b, rng, 0.3);
    samples.push_back(deviation_sample(fixture::random_field(b, rng), phi, cfg, 5));
    const auto& s = samples.back();
    REQUIRE(s.times.size() == 40);
    for (std::size_t k = 0; k < s.times.size(); ++k)
      CHECK(s.deviation2[k] <= s.integral[k] / b->lambda1() * (1.0 + 1e-9));
  }
  const auto fit = fit_deviation_bound(samples);
  CHECK(fit.C <= 1.0 / b->lambda1() * (1.0 + 1e-9));
  CHECK(fit.c >= 0.0);
  for (const auto& s : samples) CHECK(deviation_bound_ratio(s, fit) >= 1.0 - 1e-12);

  // nonlinear: the envelope covers every calibration point and one of them is tight
  auto ncfg = fixture::nonlinear_config(2, 1e-2);
  ncfg.forcing = fixture::smooth_field(b, rng, 2.0);
  samples.clear();
  for (int i = 0; i < 10; ++i) {
    auto phi = ControlPath::zero(b, 2.0, ncfg.dt);
    for (auto& v : phi.values) v = fixture::random_field(b, rng, 0.3);
    samples.push_back(deviation_sample(fixture::smooth_field(b, rng, 1.0 + 0.2 * i), phi, ncfg, 5));
  }
  const auto nfit = fit_deviation_bound(samples);
  double tightest = 1e300;
  for (const auto& s : samples) {
    const double r = deviation_bound_ratio(s, nfit);
    CHECK(r >= 1.0 - 1e-12);
    tightest = std::min(tightest, r);
  }
  CHECK(tightest == doctest::Approx(1.0).epsilon(1e-9));
}
