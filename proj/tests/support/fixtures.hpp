#pragma once

#include <cmath>

#include "nsldp/flow.hpp"

namespace nsldp::fixture {

inline SpectralField random_field(const BasisPtr& basis, Rng& rng, double scale = 1.0) {
  SpectralField u(basis);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = Complex(rng.normal(), rng.normal()) * scale;
  return u;
}

/// Random field with amplitudes decaying like |k|^{-2}, typical of smooth flows.
inline SpectralField smooth_field(const BasisPtr& basis, Rng& rng, double scale = 1.0) {
  SpectralField u(basis);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = Complex(rng.normal(), rng.normal()) * (scale / basis->eigenvalue(i));
  return u;
}

inline FlowConfig linear_config(int K, double dt = 1e-3, double eps = 0.0) {
  FlowConfig cfg;
  const auto basis = BasisSpec::make(K);
  cfg.dt = dt;
  cfg.forcing = SpectralField(basis);
  cfg.noise = NoiseSpec::power_law(basis);
  cfg.epsilon = eps;
  cfg.nonlinear = false;
  return cfg;
}

inline FlowConfig nonlinear_config(int K, double dt = 1e-3, double eps = 0.0) {
  FlowConfig cfg = linear_config(K, dt, eps);
  cfg.nonlinear = true;
  return cfg;
}

/// Noise that is O(1) on a single mode and `floor` on every other mode.
inline NoiseSpec single_mode_noise(const BasisPtr& basis, std::size_t mode, double b = 1.0, double floor = 0.01) {
  std::vector<double> w(basis->size(), floor);
  w[mode] = b;
  return NoiseSpec::custom(basis, w);
}

}  // namespace nsldp::fixture
