#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace logsy::cli {

/// Usage problems (missing files, conflicting inputs) exit with status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records every option of a subcommand so the resolved values can be echoed
/// back as a flat JSON object with the same keys as the flags.
class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& value, const std::string& help) {
    dumpers_.push_back([name, &value](nlohmann::json& j) { j[name] = value; });
    return app_->add_option("--" + name, value, help)->capture_default_str();
  }

  template <typename T>
  CLI::Option* option(const std::string& name, std::optional<T>& value, const std::string& help) {
    dumpers_.push_back([name, &value](nlohmann::json& j) {
      j[name] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
    });
    return app_->add_option("--" + name, value, help);
  }

  template <typename T>
  CLI::Option* list(const std::string& name, std::vector<T>& value, const std::string& help) {
    dumpers_.push_back([name, &value](nlohmann::json& j) { j[name] = value; });
    return app_->add_option("--" + name, value, help)->delimiter(',')->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& value, const std::string& help) {
    dumpers_.push_back([name, &value](nlohmann::json& j) { j[name] = value; });
    return app_->add_flag("--" + name, value, help);
  }

  nlohmann::json resolved() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& d : dumpers_) d(j);
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(nlohmann::json&)>> dumpers_;
};

/// Expands `--config FILE` into flags. Keys of the flat JSON object become
/// `--key=value`; arrays are comma-joined, booleans become bare flags (false
/// is dropped). Keys also given on the command line are skipped so explicit
/// flags win. The `command` key written by the config echo is ignored.
inline std::vector<std::string> expand_config(const std::vector<std::string>& argv) {
  std::vector<std::string> out;
  std::optional<std::string> config_path;
  std::set<std::string> explicit_keys;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "--config" && i + 1 < argv.size()) {
      config_path = argv[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) explicit_keys.insert(a.substr(2, a.find('=') - 2));
    out.push_back(a);
  }
  if (!config_path) return out;

  std::ifstream in(*config_path);
  if (!in) throw UsageError("cannot read config file: " + *config_path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + *config_path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a flat JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "command" || explicit_keys.count(key) || value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back("--" + key);
      continue;
    }
    std::string text;
    if (value.is_array()) {
      for (const auto& v : value) {
        if (!text.empty()) text += ',';
        text += v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      text = value.dump();
    } else {
      throw UsageError("config key '" + key + "' must be a scalar or a list");
    }
    injected.push_back("--" + key + "=" + text);
  }
  // Insert right after the program name and subcommand.
  const std::size_t at = std::min<std::size_t>(2, out.size());
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return out;
}

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("LOGSY_OUT_DIR"); env && *env) return env;
  return "out";
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing required " + what);
  if (!std::filesystem::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace logsy::cli
