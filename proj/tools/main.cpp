#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>

#include "commands.hpp"
#include "nsldp/errors.hpp"

using namespace nsldp;

namespace {

struct Command {
  const char* name;
  const char* help;
  std::function<int(cli::Context&)> run;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"simulate", "integrate the Galerkin flow and write the trajectory", cli::simulate},
      {"attractor", "approximate the omega-limit set and hitting-time tails", cli::attractor},
      {"quasipotential", "minimum action from the attractor to a target", cli::quasipotential},
      {"exit-action", "minimum action to leave a ball around the attractor", cli::exit_action},
      {"stationary", "sample the stationary measure for each noise level", cli::stationary},
      {"decay", "exponential decay of the stationary measure away from the attractor", cli::decay},
      {"reconstruct", "stationary law from stopping-time windows (chain or flow)", cli::reconstruct},
      {"selftest", "property suite on the smallest basis", cli::selftest},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-noise large deviation toolkit for truncated 2D Navier-Stokes"};
  app.set_version_flag("--version", std::string(NSLDP_VERSION));
  std::string config_path, out_dir = "nsldp_out";
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int threads = 0;
  bool reference = false;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one key, section.key=value (repeatable)");
  app.add_option("--seed", seed, "base seed (overrides run.seed)");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (overrides run.threads)");
  app.add_flag("--config-reference", reference, "print the configuration reference and exit");
  for (const auto& c : commands()) app.add_subcommand(c.name, c.help)->fallthrough();
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }
  if (reference) {
    std::cout << config_reference();
    return cli::kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return cli::kConfigError;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  Config config;
  try {
    if (!config_path.empty()) config = Config::load(config_path);
    for (const auto& o : overrides) config.set(o);
    if (seed >= 0) config.set("run.seed", std::to_string(seed));
    if (threads > 0) config.set("run.threads", std::to_string(threads));
    if (config.get_int("run.threads") < 1) throw ConfigError("run.threads", "must be at least 1");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  }

  RunManifest manifest(name, config, out_dir);
  manifest.clear_previous();
  if (!config_path.empty()) manifest.input(config_path);
  std::ofstream(manifest.output("config.ini")) << config.serialize();
  cli::Context ctx{config, manifest, static_cast<int>(config.get_int("run.threads"))};

  int status = cli::kOk;
  std::string failure;
  try {
    for (const auto& c : commands())
      if (name == c.name) status = c.run(ctx);
  } catch (const ConfigError& e) {
    failure = std::string("error: ") + e.what();
    status = cli::kConfigError;
  } catch (const InvalidArgument& e) {
    failure = std::string("error: ") + e.what();
    status = cli::kConfigError;
  } catch (const NumericalBlowup& e) {
    failure = std::string("numerical failure: ") + e.what();
    status = cli::kNumericalFailure;
  } catch (const StoppingTimeout& e) {
    failure = std::string("numerical failure: ") + e.what();
    status = cli::kNumericalFailure;
  } catch (const std::exception& e) {
    failure = std::string("numerical failure: ") + e.what();
    status = cli::kNumericalFailure;
  }
  for (const auto& w : manifest.warnings()) std::cerr << "warning: " << w << '\n';
  if (!failure.empty()) {
    std::cerr << failure << '\n';
    manifest.warn(failure);
  }
  manifest.finish(status);
  if (status == cli::kAssertionFailure) std::cerr << "an asserted property failed; see " << out_dir << '\n';
  return status;
}
