#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nsldp {

/// Bad argument to a library call (basis mismatch, out-of-range size, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An amplitude became non-finite or exceeded the blowup threshold.
class NumericalBlowup : public std::runtime_error {
 public:
  NumericalBlowup(const std::string& what, std::int64_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// A stopping time did not resolve within the configured horizon.
class StoppingTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or override could not be interpreted.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace nsldp
