#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "prof/backend.hpp"
#include "prof/data.hpp"

namespace prof {

struct CliConfig {
  std::string run_id = "default";
  std::optional<std::filesystem::path> dataset;
  std::filesystem::path runs_dir = "runs";
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> prompts_dir;
  std::optional<std::filesystem::path> initial_policy;
  std::optional<std::filesystem::path> mock_schedule;
  std::size_t train_count = 10;
  std::size_t feedback_per_essay = 3;
  std::size_t max_concurrency = 4;
  std::string log_level = "info";
  RunManifest manifest;
  // Keyed by role name: generator, simulator, judge, combiner.
  std::map<std::string, BackendConfig> backends;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
std::optional<std::string> getenv_lookup(const std::string& name);

/// Replaces ${NAME} with its value. "$$" is a literal '$'. Throws
/// ConfigError for unset variables or an unterminated reference.
std::string interpolate_env(std::string_view text, const EnvLookup& lookup = getenv_lookup);

/// YAML text to JSON after interpolation of every scalar.
nlohmann::json yaml_to_json(const std::string& yaml_text, const EnvLookup& lookup = getenv_lookup);

/// Relative paths resolve against `base_dir`.
CliConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads a YAML config file. PROF_CACHE_DIR overrides paths.cache_dir.
CliConfig load_config(const std::filesystem::path& path, const EnvLookup& lookup = getenv_lookup);

}  // namespace prof
