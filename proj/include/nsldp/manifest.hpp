#pragma once

// Run manifests: what was run, with which configuration and seed, when, and
// the SHA-256 digest of every input and output file.

#include <string>
#include <vector>

#include "nsldp/config.hpp"

namespace nsldp {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

struct ManifestFile {
  std::string path;  // relative to the output directory for outputs
  std::string sha256;
  std::uintmax_t bytes = 0;
};

class RunManifest {
 public:
  RunManifest(std::string subcommand, const Config& config, std::string out_dir);

  const std::string& out_dir() const noexcept { return out_dir_; }
  /// Absolute-or-relative path of `name` inside the output directory; parent
  /// directories are created and the file is registered as an output.
  std::string output(const std::string& name);
  void input(const std::string& path);
  void warn(const std::string& message);
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Removes outputs listed by an earlier manifest in the same directory.
  void clear_previous() const;
  /// Digests every registered output and writes manifest.json with the
  /// given exit status.
  void finish(int status);

  static constexpr const char* kFileName = "manifest.json";

 private:
  std::string subcommand_;
  Config config_;
  std::string out_dir_;
  std::string started_;
  std::vector<std::string> outputs_;
  std::vector<std::string> inputs_;
  std::vector<std::string> warnings_;
};

/// ISO-8601 UTC timestamp.
std::string utc_timestamp();

}  // namespace nsldp
