#include "nsldp/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

#include "nsldp/errors.hpp"

namespace nsldp {

namespace fs = std::filesystem;

#ifndef NSLDP_VERSION
#define NSLDP_VERSION "unknown"
#endif

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("SHA-256 initialisation failed");
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw std::runtime_error("SHA-256 final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string subcommand, const Config& config, std::string out_dir)
    : subcommand_(std::move(subcommand)), config_(config), out_dir_(std::move(out_dir)), started_(utc_timestamp()) {
  fs::create_directories(out_dir_);
}

std::string RunManifest::output(const std::string& name) {
  const auto path = fs::path(out_dir_) / name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
  return path.string();
}

void RunManifest::input(const std::string& path) {
  if (!path.empty() && std::find(inputs_.begin(), inputs_.end(), path) == inputs_.end()) inputs_.push_back(path);
}

void RunManifest::warn(const std::string& message) { warnings_.push_back(message); }

void RunManifest::clear_previous() const {
  const auto path = fs::path(out_dir_) / kFileName;
  if (!fs::exists(path)) return;
  nlohmann::json old;
  try {
    std::ifstream in(path);
    in >> old;
  } catch (const std::exception&) {
    return;  // not ours; leave the directory alone
  }
  if (old.contains("outputs"))
    for (const auto& o : old["outputs"]) fs::remove(fs::path(out_dir_) / o.value("path", std::string()));
  fs::remove(path);
}

void RunManifest::finish(int status) {
  nlohmann::ordered_json j;
  j["toolkit"] = "nsldp";
  j["version"] = NSLDP_VERSION;
  j["subcommand"] = subcommand_;
  j["status"] = status;
  j["seed"] = config_.get_int("run.seed");
  j["started"] = started_;
  j["finished"] = utc_timestamp();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& k : config_schema()) {
    const auto dot = k.name.find('.');
    cfg[k.name.substr(0, dot)][k.name.substr(dot + 1)] = config_.values().at(k.name);
  }
  j["config"] = cfg;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : inputs_) {
    nlohmann::ordered_json f;
    f["path"] = p;
    f["sha256"] = fs::exists(p) ? sha256_file(p) : "";
    j["inputs"].push_back(f);
  }
  j["outputs"] = nlohmann::ordered_json::array();
  std::vector<std::string> listed;
  for (const auto& name : outputs_) {
    const auto path = fs::path(out_dir_) / name;
    if (!fs::exists(path)) continue;  // registered but not written (failed run)
    nlohmann::ordered_json f;
    f["path"] = name;
    f["sha256"] = sha256_file(path.string());
    f["bytes"] = fs::file_size(path);
    j["outputs"].push_back(f);
    listed.push_back(fs::weakly_canonical(path).string());
  }
  // anything else in the directory predates this run and is not ours
  nlohmann::ordered_json untracked = nlohmann::ordered_json::array();
  std::vector<std::string> others;
  for (const auto& e : fs::recursive_directory_iterator(out_dir_)) {
    if (!e.is_regular_file() || e.path().filename() == kFileName) continue;
    if (std::find(listed.begin(), listed.end(), fs::weakly_canonical(e.path()).string()) == listed.end())
      others.push_back(fs::relative(e.path(), out_dir_).string());
  }
  std::sort(others.begin(), others.end());
  for (const auto& o : others) untracked.push_back(o);
  j["untracked"] = untracked;
  j["warnings"] = warnings_;
  std::ofstream out(fs::path(out_dir_) / kFileName);
  out << j.dump(2) << '\n';
}

}  // namespace nsldp
