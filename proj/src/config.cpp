#include "nsldp/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nsldp/errors.hpp"

namespace nsldp {

namespace {

using T = ConfigType;

const std::vector<ConfigKey> kSchema = {
    {"run.seed", T::Int, "1", "base seed; every random stream derives from it"},
    {"run.threads", T::Int, "1", "worker threads; results do not depend on it"},

    {"basis.K", T::Int, "4", "Fourier cutoff: modes with 0 < max(|k1|,|k2|) <= K"},

    {"noise.b0", T::Double, "1", "noise amplitude on the slowest mode"},
    {"noise.decay", T::Double, "3", "power-law decay exponent of b_k"},
    {"noise.weights", T::DoubleList, "", "explicit b_k in basis order; overrides b0 and decay"},

    {"flow.dt", T::Double, "0.001", "time step"},
    {"flow.epsilon", T::Double, "0.05", "noise intensity for simulate"},
    {"flow.nonlinear", T::Bool, "true", "false drops B(u,u) (linear Ornstein-Uhlenbeck system)"},
    {"flow.forcing", T::String, "default", "default, zero, or a field CSV path"},
    {"flow.forcing_amplitude", T::Double, "2", "amplitude of the default forcing"},
    {"flow.initial", T::String, "zero", "zero or a field CSV path"},
    {"flow.T", T::Double, "10", "simulation horizon"},
    {"flow.record_every", T::Int, "100", "steps between trajectory rows"},
    {"flow.snapshot_every", T::Int, "0", "steps between full-state snapshots (0: none)"},
    {"flow.resume", T::String, "", "checkpoint file to continue from"},

    {"coupling.gain", T::Double, "0", "nudging gain; 0 disables the coupled run"},
    {"coupling.modes", T::Int, "0", "number of nudged modes in spectral order (0: all)"},
    {"coupling.offset", T::Double, "1", "amplitude of the random offset of the nudged start"},

    {"attractor.dir", T::String, "", "load this attractor directory instead of computing one"},
    {"attractor.ensemble", T::Int, "8", "number of initial conditions"},
    {"attractor.ensemble_scale", T::Double, "2", "scale of the smooth random initial conditions"},
    {"attractor.transient", T::Double, "50", "discarded transient time"},
    {"attractor.collect", T::Double, "10", "collection window after the transient"},
    {"attractor.sample_dt", T::Double, "0.5", "sampling interval in the collection window"},
    {"attractor.cluster_tol", T::Double, "0.02", "merge radius for collected points"},
    {"attractor.t_max", T::Double, "50", "horizon for deterministic hitting times"},
    {"attractor.eta", T::Double, "0.35", "neighbourhood radius for hitting times"},
    {"attractor.hitting_offset", T::Double, "1", "start = first point + offset e_(1,0) (0: no hitting table)"},
    {"attractor.hitting_eps", T::DoubleList, "0.1,0.05,0.02", "noise levels for the hitting-time tail"},
    {"attractor.hitting_s", T::DoubleList, "", "tail times; empty: 0, 0.5, 1, 2, 3 times the deterministic time"},
    {"attractor.hitting_samples", T::Int, "200", "runs per noise level"},

    {"action.target", T::String, "", "target field CSV; empty: start + target_norm e_(1,0)"},
    {"action.target_norm", T::Double, "0.5", "offset of the default target"},
    {"action.eta", T::Double, "0.01", "final terminal radius"},
    {"action.stages", T::Int, "4", "continuation stages (radius halves each stage)"},
    {"action.horizon", T::Double, "5", "control horizon"},
    {"action.max_iterations", T::Int, "2000", "optimizer iterations per stage"},
    {"action.check_doubling", T::Bool, "false", "also solve with twice the horizon"},
    {"action.control", T::String, "", "replay this control CSV instead of optimising"},
    {"action.exit_ball", T::Double, "3", "exit-action starts inside the H-ball of this radius"},
    {"action.exit_eta", T::Double, "0.35", "exit-action endpoint distance from the attractor"},
    {"action.exit_starts", T::Int, "3", "multi-start count for exit-action"},

    {"measure.eps_list", T::DoubleList, "0.1,0.05,0.02", "noise levels (decay needs at least 3)"},
    {"measure.eta", T::Double, "0.35", "neighbourhood radius of the attractor"},
    {"measure.burn_in", T::Double, "0", "discarded time; 0: 10 (1 + 1/eps) capped at 200"},
    {"measure.horizon", T::Double, "2000", "trajectory length per chain"},
    {"measure.stride", T::Int, "50", "steps between samples"},
    {"measure.chains", T::Int, "2", "independent chains per noise level"},
    {"measure.R_list", T::DoubleList, "", "radii for the tightness profile (empty: skipped)"},
    {"measure.tube_radius", T::Double, "0", "tube radius around the deterministic path (0: skipped)"},
    {"measure.tube_T", T::Double, "2", "tube horizon"},
    {"measure.tube_samples", T::Int, "400", "runs per noise level for the tube"},
    {"measure.lower_delta", T::Double, "0", "ball radius for the lower-bound check (0: skipped)"},
    {"measure.lower_tolerance", T::Double, "0.05", "allowed excess over the quasipotential"},
    {"measure.lower_target", T::String, "", "target field CSV; empty: attractor + 0.5 e_(1,0)"},

    {"reconstruct.chain", T::String, "", "finite chain file; empty: flow estimator"},
    {"reconstruct.gamma", T::DoubleList, "0", "state indices of the test set (chain mode)"},
    {"reconstruct.delta", T::Double, "1", "window length (rounded for chains; 0: select for the flow)"},
    {"reconstruct.shifts", T::DoubleList, "1,2,5", "shifts for the shift identity"},
    {"reconstruct.outer_samples", T::Int, "200", "measure samples used by the flow estimator"},
    {"reconstruct.delta_max", T::Double, "1", "upper limit of the selected window"},
};

std::string canonical_double(double x) {
  if (!std::isfinite(x)) throw InvalidArgument("non-finite value");
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double x = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(x))
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return x;
}

std::string canonicalize(const ConfigKey& k, const std::string& raw) {
  const auto text = trim(raw);
  switch (k.type) {
    case T::Int: {
      std::int64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ConfigError(k.name, "expected an integer, got '" + raw + "'");
      return std::to_string(v);
    }
    case T::Double:
      return canonical_double(parse_double(k.name, text));
    case T::Bool: {
      std::string low = text;
      std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
      if (low == "true" || low == "1" || low == "yes" || low == "on") return "true";
      if (low == "false" || low == "0" || low == "no" || low == "off") return "false";
      throw ConfigError(k.name, "expected true or false, got '" + raw + "'");
    }
    case T::String:
      return text;
    case T::DoubleList: {
      std::string out;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!out.empty()) out += ',';
        out += canonical_double(parse_double(k.name, item));
      }
      if (!text.empty() && text.back() == ',') throw ConfigError(k.name, "trailing comma");
      return out;
    }
  }
  return text;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() { return kSchema; }

Config::Config() {
  for (const auto& k : kSchema) values_[k.name] = canonicalize(k, k.default_value);
}

const ConfigKey& Config::lookup(const std::string& key) const {
  for (const auto& k : kSchema)
    if (k.name == key) return k;
  throw ConfigError(key, "unknown key");
}

Config Config::parse(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(section, "key outside of any section");
    for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  return parse(in);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must look like section.key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Config::set(const std::string& key, const std::string& value) {
  const auto& k = lookup(key);
  values_[k.name] = canonicalize(k, value);
}

std::int64_t Config::get_int(const std::string& key) const {
  if (lookup(key).type != T::Int) throw ConfigError(key, "not an integer key");
  return std::stoll(values_.at(key));
}

double Config::get_double(const std::string& key) const {
  if (lookup(key).type != T::Double) throw ConfigError(key, "not a number key");
  return parse_double(key, values_.at(key));
}

bool Config::get_bool(const std::string& key) const {
  if (lookup(key).type != T::Bool) throw ConfigError(key, "not a boolean key");
  return values_.at(key) == "true";
}

const std::string& Config::get_string(const std::string& key) const {
  if (lookup(key).type != T::String) throw ConfigError(key, "not a string key");
  return values_.at(key);
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  if (lookup(key).type != T::DoubleList) throw ConfigError(key, "not a list key");
  std::vector<double> out;
  std::stringstream ss(values_.at(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::string Config::serialize() const {
  std::ostringstream os;
  std::string section;
  for (const auto& k : kSchema) {
    const auto dot = k.name.find('.');
    const auto s = k.name.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << k.name.substr(dot + 1) << " = " << values_.at(k.name) << '\n';
  }
  return os.str();
}

FlowConfig flow_config_from(const Config& c) {
  const auto K = c.get_int("basis.K");
  if (K < 1 || K > 32) throw ConfigError("basis.K", "must be between 1 and 32");
  const auto basis = BasisSpec::make(static_cast<int>(K));
  FlowConfig cfg;
  cfg.dt = c.get_double("flow.dt");
  if (!(cfg.dt > 0.0)) throw ConfigError("flow.dt", "must be positive");
  cfg.epsilon = c.get_double("flow.epsilon");
  if (cfg.epsilon < 0.0) throw ConfigError("flow.epsilon", "must be non-negative");
  cfg.nonlinear = c.get_bool("flow.nonlinear");
  cfg.seed = static_cast<std::uint64_t>(c.get_int("run.seed"));

  const auto weights = c.get_doubles("noise.weights");
  try {
    if (!weights.empty())
      cfg.noise = NoiseSpec::custom(basis, weights);
    else
      cfg.noise = NoiseSpec::power_law(basis, c.get_double("noise.b0"), c.get_double("noise.decay"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(weights.empty() ? "noise.b0" : "noise.weights", e.what());
  }

  const auto& forcing = c.get_string("flow.forcing");
  if (forcing == "default") {
    cfg.forcing = default_forcing(basis, c.get_double("flow.forcing_amplitude"));
  } else if (forcing == "zero") {
    cfg.forcing = SpectralField(basis);
  } else {
    try {
      cfg.forcing = load_field_csv(forcing, basis);
    } catch (const std::exception& e) {
      throw ConfigError("flow.forcing", e.what());
    }
  }
  return cfg;
}

std::string config_reference() {
  std::ostringstream os;
  os << "| key | type | default | description |\n|---|---|---|---|\n";
  for (const auto& k : kSchema) {
    const char* type = k.type == T::Int      ? "int"
                       : k.type == T::Double ? "number"
                       : k.type == T::Bool   ? "bool"
                       : k.type == T::String ? "string"
                                             : "number list";
    os << "| `" << k.name << "` | " << type << " | `" << k.default_value << "` | " << k.help << " |\n";
  }
  return os.str();
}

}  // namespace nsldp
