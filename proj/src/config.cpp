#include "prof/config.hpp"

#include <charconv>
#include <cstdlib>

#include <yaml-cpp/yaml.h>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

std::optional<std::string> getenv_lookup(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

std::string interpolate_env(std::string_view text, const EnvLookup& lookup) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '$') {
      out += text[i];
      continue;
    }
    if (i + 1 < text.size() && text[i + 1] == '$') {
      out += '$';
      ++i;
      continue;
    }
    if (i + 1 >= text.size() || text[i + 1] != '{') {
      out += '$';
      continue;
    }
    const auto close = text.find('}', i + 2);
    if (close == std::string_view::npos) throw ConfigError("unterminated ${ in config value");
    const std::string name(text.substr(i + 2, close - i - 2));
    if (name.empty()) throw ConfigError("empty ${} in config value");
    const auto value = lookup(name);
    if (!value) throw ConfigError("environment variable " + name + " is not set");
    out += *value;
    i = close;
  }
  return out;
}

namespace {

json scalar_to_json(const YAML::Node& node, const EnvLookup& lookup) {
  const std::string text = interpolate_env(node.Scalar(), lookup);
  if (node.Tag() == "!") return text;  // quoted
  if (text.empty() || text == "~" || text == "null") return nullptr;
  if (text == "true") return true;
  if (text == "false") return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  long long iv = 0;
  if (auto [p, ec] = std::from_chars(first, last, iv); ec == std::errc() && p == last) return iv;
  double dv = 0;
  if (auto [p, ec] = std::from_chars(first, last, dv); ec == std::errc() && p == last) return dv;
  return text;
}

json node_to_json(const YAML::Node& node, const EnvLookup& lookup) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(node, lookup);
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(node_to_json(item, lookup));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = node_to_json(kv.second, lookup);
      return obj;
    }
  }
  return nullptr;
}

std::optional<std::filesystem::path> path_at(const json& section, const char* key, const std::filesystem::path& base) {
  if (!section.contains(key) || section.at(key).is_null()) return std::nullopt;
  std::filesystem::path p = section.at(key).get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

template <typename T>
void read_into(const json& section, const char* key, T& target) {
  if (section.contains(key) && !section.at(key).is_null()) target = section.at(key).get<T>();
}

}  // namespace

json yaml_to_json(const std::string& yaml_text, const EnvLookup& lookup) {
  try {
    return node_to_json(YAML::Load(yaml_text), lookup);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
}

CliConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  CliConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("config root must be a mapping");
  try {
    read_into(j, "run_id", c.run_id);
    read_into(j, "max_concurrency", c.max_concurrency);
    read_into(j, "log_level", c.log_level);
    const json paths = j.value("paths", json::object());
    c.dataset = path_at(paths, "dataset", base_dir);
    if (auto p = path_at(paths, "runs_dir", base_dir)) c.runs_dir = *p;
    c.cache_dir = path_at(paths, "cache_dir", base_dir);
    c.prompts_dir = path_at(paths, "prompts", base_dir);
    c.initial_policy = path_at(paths, "initial_policy", base_dir);
    c.mock_schedule = path_at(paths, "mock_schedule", base_dir);

    const json data = j.value("data", json::object());
    read_into(data, "train_count", c.train_count);
    read_into(data, "feedback_per_essay", c.feedback_per_essay);

    auto& m = c.manifest;
    const json loop = j.value("loop", json::object());
    read_into(loop, "iterations", m.iteration_count);
    read_into(loop, "k", m.k_samples);
    read_into(loop, "beta", m.beta);
    read_into(loop, "learning_rate", m.learning_rate);
    read_into(loop, "epochs", m.epochs);
    read_into(loop, "loss_form", m.loss_form);
    read_into(loop, "sim_temperature", m.sim_temperature);
    read_into(loop, "generator_temperature", m.generator_temperature);
    read_into(loop, "seed", m.seed);
    const json eval = j.value("eval", json::object());
    read_into(eval, "temperatures", m.temperatures);
    read_into(eval, "seeds", m.seeds);

    const json backends = j.value("backends", json::object());
    for (const auto& [role, cfg] : backends.items()) {
      role_from_string(role);
      BackendConfig b = cfg.get<BackendConfig>();
      if (b.cache_dir && b.cache_dir->is_relative()) b.cache_dir = (base_dir / *b.cache_dir).lexically_normal();
      validate(b);
      c.backends[role] = b;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (c.max_concurrency == 0) throw ConfigError("max_concurrency must be >= 1");
  return c;
}

CliConfig load_config(const std::filesystem::path& path, const EnvLookup& lookup) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  CliConfig c = config_from_json(yaml_to_json(read_file(path), lookup), path.parent_path());
  if (auto dir = lookup("PROF_CACHE_DIR"); dir && !dir->empty()) c.cache_dir = std::filesystem::path(*dir);
  return c;
}

}  // namespace prof
