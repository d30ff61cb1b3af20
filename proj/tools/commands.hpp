#pragma once

#include <string>

#include "nsldp/config.hpp"
#include "nsldp/manifest.hpp"

namespace nsldp::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericalFailure = 3;
inline constexpr int kAssertionFailure = 4;

struct Context {
  Config config;
  RunManifest& manifest;
  int threads = 1;
};

int simulate(Context& ctx);
int attractor(Context& ctx);
int quasipotential(Context& ctx);
int exit_action(Context& ctx);
int stationary(Context& ctx);
int decay(Context& ctx);
int reconstruct(Context& ctx);
int selftest(Context& ctx);

}  // namespace nsldp::cli
