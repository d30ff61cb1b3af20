#include "nsldp/optimize.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace nsldp {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

OptimizerReport minimize_lbfgs(const Objective& f, std::vector<double>& x, const OptimizerSettings& settings) {
  OptimizerReport rep;
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), d(n);

  double fx = f(x, g);
  ++rep.evaluations;
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> hist;
  int stalled = 0;

  for (rep.iterations = 0; rep.iterations < settings.max_iterations; ++rep.iterations) {
    rep.gradient_norm = std::sqrt(dot(g, g));
    if (!std::isfinite(fx) || !std::isfinite(rep.gradient_norm)) {
      rep.message = "non-finite objective or gradient";
      break;
    }
    if (rep.gradient_norm < settings.gradient_tolerance) {
      rep.converged = true;
      rep.message = "gradient tolerance reached";
      break;
    }

    // two-loop recursion
    d = g;
    std::vector<double> alpha(hist.size());
    for (std::size_t j = hist.size(); j-- > 0;) {
      alpha[j] = hist[j].rho * dot(hist[j].s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[j] * hist[j].y[i];
    }
    if (!hist.empty()) {
      const auto& last = hist.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t j = 0; j < hist.size(); ++j) {
      const double beta = hist[j].rho * dot(hist[j].y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * hist[j].s[i];
    }
    for (auto& v : d) v = -v;

    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = -rep.gradient_norm * rep.gradient_norm;
    }

    double step = hist.empty() ? std::min(1.0, 1.0 / rep.gradient_norm) : 1.0;
    double f_new = fx;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      f_new = f(x_new, g_new);
      ++rep.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      rep.message = "line search failed to decrease the objective";
      // at round-off level a small gradient still counts as stationary
      rep.converged = rep.gradient_norm <= 1e-4 * (1.0 + std::abs(fx));
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (settings.memory > 0 && sy > 1e-16 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      hist.push_back(std::move(p));
      if (static_cast<int>(hist.size()) > settings.memory) hist.pop_front();
    }

    const double decrease = fx - f_new;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;

    if (decrease <= settings.function_tolerance * std::max(1.0, std::abs(fx))) {
      if (++stalled >= settings.stall_window) {
        rep.converged = true;
        rep.message = "relative decrease below function tolerance";
        ++rep.iterations;
        break;
      }
    } else {
      stalled = 0;
    }
  }
  if (rep.iterations >= settings.max_iterations && rep.message.empty()) rep.message = "iteration limit reached";
  rep.value = fx;
  rep.gradient_norm = std::sqrt(dot(g, g));
  return rep;
}

}  // namespace nsldp
