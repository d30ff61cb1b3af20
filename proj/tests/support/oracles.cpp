#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nsldp::oracle {

namespace {

struct Grid2 {
  int n;
  std::vector<double> a;
  explicit Grid2(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Velocity components and their gradients on the grid.
void synthesize(const SpectralField& f, int n, Grid2& vx, Grid2& vy, Grid2* dvx_dx, Grid2* dvx_dy, Grid2* dvy_dx,
                Grid2* dvy_dy) {
  const double h = 2.0 * std::numbers::pi / n;
  const double s = 1.0 / std::sqrt(2.0);
  for (std::size_t m = 0; m < f.size(); ++m) {
    const auto k = f.basis()->mode(m);
    const double kn = std::sqrt(static_cast<double>(k.norm2()));
    const double px = -k.k2 / kn, py = k.k1 / kn;
    const Complex a = f[m];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double ph = k.k1 * i * h + k.k2 * j * h;
        const Complex e = a * Complex(std::cos(ph), std::sin(ph));
        // a e^{ikx} + c.c. = 2 Re, derivative d/dx_l -> 2 Re(i k_l ...)
        const double re = 2.0 * e.real() * s;
        const double dre = -2.0 * e.imag() * s;  // Re(i e) = -Im e
        vx.at(i, j) += re * px;
        vy.at(i, j) += re * py;
        if (dvx_dx) {
          dvx_dx->at(i, j) += dre * k.k1 * px;
          dvx_dy->at(i, j) += dre * k.k2 * px;
          dvy_dx->at(i, j) += dre * k.k1 * py;
          dvy_dy->at(i, j) += dre * k.k2 * py;
        }
      }
  }
}

}  // namespace

SpectralField collocation_bilinear(const SpectralField& u, const SpectralField& v, int n) {
  Grid2 ux(n), uy(n), vx(n), vy(n), vxx(n), vxy(n), vyx(n), vyy(n);
  synthesize(u, n, ux, uy, nullptr, nullptr, nullptr, nullptr);
  synthesize(v, n, vx, vy, &vxx, &vxy, &vyx, &vyy);
  Grid2 fx(n), fy(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      fx.at(i, j) = ux.at(i, j) * vxx.at(i, j) + uy.at(i, j) * vxy.at(i, j);
      fy.at(i, j) = ux.at(i, j) * vyx.at(i, j) + uy.at(i, j) * vyy.at(i, j);
    }
  const double h = 2.0 * std::numbers::pi / n;
  SpectralField out(u.basis());
  for (std::size_t m = 0; m < out.size(); ++m) {
    const auto q = out.basis()->mode(m);
    const double qn = std::sqrt(static_cast<double>(q.norm2()));
    const double px = -q.k2 / qn, py = q.k1 / qn;
    Complex acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double ph = q.k1 * i * h + q.k2 * j * h;
        acc += (fx.at(i, j) * px + fy.at(i, j) * py) * Complex(std::cos(ph), -std::sin(ph));
      }
    out[m] = std::sqrt(2.0) * acc / static_cast<double>(n * n);
  }
  return out;
}

double two_shell_chi4_tail(double c1, double c2, double x) {
  // P(c1 X + c2 Y > x) = int_0^inf f(y) S((x - c2 y) / c1) dy with
  // f(y) = y e^{-y/2} / 4 and S(z) = e^{-z/2}(1 + z/2) for z > 0, 1 otherwise.
  if (x <= 0.0) return 1.0;
  auto S = [](double z) { return z <= 0.0 ? 1.0 : std::exp(-0.5 * z) * (1.0 + 0.5 * z); };
  auto f = [](double y) { return 0.25 * y * std::exp(-0.5 * y); };
  const double y_break = x / c2;  // beyond this the first factor is certain
  // composite Simpson on [0, y_break], closed form for the remaining tail mass
  const int n = 20000;
  const double hstep = y_break / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double y = i * hstep;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f(y) * S((x - c2 * y) / c1);
  }
  acc *= hstep / 3.0;
  const double tail = S(y_break);  // P(Y > y_break)
  return acc + tail;
}

std::vector<double> propagate(const std::vector<std::vector<double>>& P, std::vector<double> dist, int steps) {
  const std::size_t n = P.size();
  for (int s = 0; s < steps; ++s) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[j] += dist[i] * P[i][j];
    dist.swap(next);
  }
  return dist;
}

double enumerate_window_average(const std::vector<std::vector<double>>& P, const std::vector<int>& tau, int v,
                                int delta, const std::vector<double>& psi) {
  const int len = tau[static_cast<std::size_t>(v)] + delta;
  const int t0 = tau[static_cast<std::size_t>(v)];
  const std::size_t n = P.size();
  double total = 0.0;
  std::vector<int> path(static_cast<std::size_t>(len) + 1, 0);
  path[0] = v;
  // depth-first over all paths, carrying probability and window sum
  auto rec = [&](auto&& self, int depth, double prob, double window) -> void {
    if (prob == 0.0) return;
    if (depth == len) {
      total += prob * window;
      return;
    }
    const auto from = static_cast<std::size_t>(path[static_cast<std::size_t>(depth)]);
    for (std::size_t j = 0; j < n; ++j) {
      path[static_cast<std::size_t>(depth) + 1] = static_cast<int>(j);
      const double add = depth + 1 > t0 ? psi[j] : 0.0;
      self(self, depth + 1, prob * P[from][j], window + add);
    }
  };
  rec(rec, 0, 1.0, 0.0);
  return total / delta;
}

std::vector<double> power_stationary(const std::vector<std::vector<double>>& P) {
  const std::size_t n = P.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < n; ++j) next[j] += 0.5 * pi[i] * P[i][j];
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - pi[i]));
    pi.swap(next);
    if (diff < 1e-16) break;
  }
  return pi;
}

double scalar_tube_infimum(double lambda, double b, double phi0, double r, double T, int cells, int steps) {
  const double dt = T / steps;
  const double E = std::exp(-lambda * dt);
  const double W = -std::expm1(-lambda * dt) / lambda;
  std::vector<double> d(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) d[static_cast<std::size_t>(i)] = -r + 2.0 * r * i / (cells - 1);
  std::vector<double> value(static_cast<std::size_t>(cells), 0.0), next(static_cast<std::size_t>(cells));
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < d.size(); ++j) {
        const double chi = (d[j] - E * d[i]) / W;
        const double c = 0.5 * (phi0 + chi) * (phi0 + chi) * dt / (b * b) + value[j];
        best = std::min(best, c);
      }
      next[i] = best;
    }
    value.swap(next);
  }
  return value[static_cast<std::size_t>(cells / 2)];
}

}  // namespace nsldp::oracle
