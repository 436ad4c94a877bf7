#include "prof/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

std::string to_string(Role role) {
  switch (role) {
    case Role::generator: return "generator";
    case Role::simulator: return "simulator";
    case Role::judge: return "judge";
    case Role::combiner: return "combiner";
  }
  return "unknown";
}

Role role_from_string(const std::string& name) {
  if (name == "generator") return Role::generator;
  if (name == "simulator") return Role::simulator;
  if (name == "judge") return Role::judge;
  if (name == "combiner") return Role::combiner;
  throw ConfigError("unknown role '" + name + "'");
}

void validate(const GenerationRequest& request) {
  if (request.prompt.empty()) throw PreconditionError("generation request has an empty prompt");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw PreconditionError("temperature " + std::to_string(request.temperature) + " outside [0, 2]");
  }
  if (request.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

void validate(const BackendConfig& config) {
  if (config.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  if (config.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (config.kind == BackendKind::http_chat) {
    if (!config.base_url || config.base_url->empty()) throw ConfigError("http_chat backend requires base_url");
    if (!config.model_name || config.model_name->empty()) throw ConfigError("http_chat backend requires model_name");
  }
}

std::string backend_identity(const BackendConfig& config) {
  if (config.kind == BackendKind::http_chat) {
    return "http_chat:" + config.base_url.value_or("") + "#" + config.model_name.value_or("");
  }
  return "scripted_mock:" + config.name;
}

void to_json(json& j, const BackendConfig& c) {
  j = json{{"kind", c.kind == BackendKind::http_chat ? "http_chat" : "scripted_mock"},
           {"name", c.name},
           {"max_concurrency", c.max_concurrency},
           {"retry", {{"max_attempts", c.retry.max_attempts}, {"base_delay_ms", c.retry.base_delay.count()}}},
           {"timeout_s", c.timeout.count()}};
  if (c.base_url) j["base_url"] = *c.base_url;
  if (c.model_name) j["model_name"] = *c.model_name;
  if (c.api_key_env) j["api_key_env"] = *c.api_key_env;
  if (c.cache_dir) j["cache_dir"] = c.cache_dir->string();
}

void from_json(const json& j, BackendConfig& c) {
  const auto kind = j.value("kind", std::string("scripted_mock"));
  if (kind == "http_chat") c.kind = BackendKind::http_chat;
  else if (kind == "scripted_mock") c.kind = BackendKind::scripted_mock;
  else throw ConfigError("unknown backend kind '" + kind + "'");
  c.name = j.value("name", c.kind == BackendKind::http_chat ? std::string("http") : std::string("mock"));
  if (j.contains("base_url")) c.base_url = j.at("base_url").get<std::string>();
  if (j.contains("model_name")) c.model_name = j.at("model_name").get<std::string>();
  if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
  if (j.contains("cache_dir") && !j.at("cache_dir").get<std::string>().empty()) {
    c.cache_dir = j.at("cache_dir").get<std::string>();
  }
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<long>(c.timeout.count())));
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
    c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", static_cast<long>(c.retry.base_delay.count())));
  }
  if (j.contains("api_key")) throw ConfigError("API keys are read from the environment only; use api_key_env");
}

MockRoute mock_route_from_json(const json& j) {
  MockRoute route;
  if (j.contains("role")) route.role = role_from_string(j.at("role").get<std::string>());
  route.pattern = j.value("pattern", std::string(".*"));
  route.min_temperature = j.value("min_temperature", 0.0);
  route.max_temperature = j.value("max_temperature", 2.0);
  if (j.contains("response")) route.responses.push_back(j.at("response").get<std::string>());
  if (j.contains("responses")) {
    for (const auto& r : j.at("responses")) route.responses.push_back(r.get<std::string>());
  }
  if (route.responses.empty()) throw ConfigError("scripted route needs 'response' or 'responses'");
  return route;
}

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw IoError("cannot create cache dir " + dir_->string() + ": " + ec.message());
  }
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
  }
  if (!dir_) return std::nullopt;
  const auto path = *dir_ / key;
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string value = ss.str();
  {
    std::unique_lock lock(mutex_);
    memory_.emplace(key, value);
  }
  ++hits_;
  return value;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  {
    std::unique_lock lock(mutex_);
    // First write wins in memory; concurrent writers carry identical content.
    memory_.emplace(key, value);
  }
  if (!dir_) return;
  const auto path = *dir_ / key;
  if (std::filesystem::exists(path)) return;
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp = *dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry " + tmp.string());
    out << value;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

// ---------------------------------------------------------------- completion

const std::string& Completion::value() const {
  if (error_) std::rethrow_exception(error_);
  return text_;
}

std::string Completion::error_message() const {
  if (!error_) return {};
  try {
    std::rethrow_exception(error_);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

// ---------------------------------------------------------------- backend

Backend::Backend(BackendConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(config_.cache_dir),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  validate(config_);
  if (config_.kind == BackendKind::http_chat && !transport_) transport_ = make_http_transport();
}

void Backend::add_route(MockRoute route) {
  std::regex regex;
  try {
    regex = std::regex(route.pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("invalid route pattern '" + route.pattern + "': " + e.what());
  }
  routes_.push_back({std::move(route), std::move(regex)});
}

std::string Backend::cache_key(const GenerationRequest& request) const {
  json material{{"backend", backend_identity(config_)},
                {"model", config_.model_name.value_or("")},
                {"role", to_string(request.role)},
                {"prompt", request.prompt},
                {"temperature", request.temperature},
                {"seed", request.seed},
                {"max_tokens", request.max_tokens}};
  return sha256_hex(material.dump());
}

std::string Backend::generate(const GenerationRequest& request) {
  validate(request);
  const std::string key = cache_key(request);
  if (auto hit = cache_.get(key)) return *hit;
  std::string text = config_.kind == BackendKind::scripted_mock ? call_mock(request) : call_http(request);
  cache_.put(key, text);
  return text;
}

std::string Backend::call_mock(const GenerationRequest& request) const {
  for (const auto& compiled : routes_) {
    const auto& route = compiled.route;
    if (route.role && *route.role != request.role) continue;
    if (request.temperature < route.min_temperature || request.temperature > route.max_temperature) continue;
    if (!std::regex_search(request.prompt, compiled.regex)) continue;
    if (route.responder) return route.responder(request);
    const auto n = static_cast<std::int64_t>(route.responses.size());
    const auto idx = ((request.seed % n) + n) % n;
    return route.responses[static_cast<std::size_t>(idx)];
  }
  throw NoRouteMatched("role=" + to_string(request.role) + " temperature=" + std::to_string(request.temperature));
}

std::string Backend::call_http(const GenerationRequest& request) {
  json body{{"model", *config_.model_name},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"seed", request.seed},
            {"max_tokens", request.max_tokens}};
  HttpHeaders headers{{"Content-Type", "application/json"}};
  const std::string key_env = config_.api_key_env.value_or("PROF_API_KEY");
  if (const char* key = std::getenv(key_env.c_str()); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  std::string url = *config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  const std::string payload = body.dump();

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  bool last_rate_limited = false;
  int last_status = 0;
  std::string last_body;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    HttpResponse response = transport_->post_json(url, payload, headers, config_.timeout);
    if (response.status == 200) {
      json parsed;
      try {
        parsed = json::parse(response.body);
        const auto& content = parsed.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw MalformedResponse("message content is not a string");
        return content.get<std::string>();
      } catch (const json::exception& e) {
        throw MalformedResponse(e.what());
      }
    }
    last_status = response.status;
    last_body = response.body;
    last_rate_limited = response.status == 429;
    const bool retryable = response.status == 429 || response.status >= 500 || response.status == 0;
    if (!retryable) throw HttpError(response.status, response.body);
    if (attempt == config_.retry.max_attempts) break;
    const double backoff = static_cast<double>(config_.retry.base_delay.count()) * static_cast<double>(1LL << (attempt - 1));
    const double jitter = 1.0 + 0.5 * uniform01(jitter_rng);
    sleeper_(std::chrono::milliseconds(static_cast<long long>(backoff * jitter)));
  }
  if (last_rate_limited) throw RateLimited(config_.retry.max_attempts);
  throw HttpError(last_status, last_body);
}

std::vector<Completion> Backend::batch_generate(const std::vector<GenerationRequest>& requests) {
  if (requests.empty()) throw PreconditionError("batch_generate needs at least one request");
  std::vector<Completion> results(requests.size(), Completion::success({}));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      try {
        results[i] = Completion::success(generate(requests[i]));
      } catch (...) {
        results[i] = Completion::failure(std::current_exception());
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrency), requests.size());
  if (workers <= 1) {
    worker();
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return results;
}

}  // namespace prof
