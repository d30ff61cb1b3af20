#pragma once

// Run configuration: a flat INI file of typed keys grouped in sections
// (run, basis, noise, flow, coupling, attractor, action, measure,
// reconstruct).  Every key has a type and a default; unknown keys and values
// that do not parse raise ConfigError naming the key.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nsldp/flow.hpp"

namespace nsldp {

enum class ConfigType { Int, Double, Bool, String, DoubleList };

struct ConfigKey {
  std::string name;  // section.key
  ConfigType type;
  std::string default_value;
  std::string help;
};

/// All recognised keys in section order.
const std::vector<ConfigKey>& config_schema();

class Config {
 public:
  /// Every key at its default.
  Config();

  /// Reads INI text.  Keys not present keep their defaults.
  static Config parse(std::istream& is);
  static Config load(const std::string& path);

  /// Sets one key from text; `assignment` is "section.key=value".
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// Canonical INI text: every key, schema order, canonical value spelling.
  std::string serialize() const;
  /// section -> key -> canonical value.
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  friend bool operator==(const Config&, const Config&) = default;

 private:
  const ConfigKey& lookup(const std::string& key) const;
  std::map<std::string, std::string> values_;  // canonical text by full key
};

/// Flow configuration from basis.*, noise.*, flow.* and run.seed; the
/// forcing is "default", "zero" or a SpectralField CSV path.
FlowConfig flow_config_from(const Config& c);

/// Markdown table of the schema (name, type, default, description).
std::string config_reference();

}  // namespace nsldp
