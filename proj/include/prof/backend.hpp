#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace prof {

enum class Role { generator, simulator, judge, combiner };

std::string to_string(Role role);
Role role_from_string(const std::string& name);

struct GenerationRequest {
  Role role = Role::generator;
  std::string prompt;
  double temperature = 0.0;
  std::int64_t seed = 0;
  int max_tokens = 1024;
};

/// Throws PreconditionError on an empty prompt, temperature outside [0, 2]
/// or non-positive max_tokens.
void validate(const GenerationRequest& request);

enum class BackendKind { scripted_mock, http_chat };

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
};

struct BackendConfig {
  BackendKind kind = BackendKind::scripted_mock;
  // Free-form label; part of the cache identity for scripted mocks.
  std::string name = "mock";
  std::optional<std::string> base_url;
  std::optional<std::string> model_name;
  std::optional<std::string> api_key_env;
  int max_concurrency = 4;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
  std::optional<std::filesystem::path> cache_dir;
};

/// http_chat requires base_url and model_name; max_concurrency >= 1.
void validate(const BackendConfig& config);

/// "http_chat:<base_url>#<model>" or "scripted_mock:<name>".
std::string backend_identity(const BackendConfig& config);

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

// ---------------------------------------------------------------- transport

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// POSTs a JSON body. Connection and read timeouts surface as prof::Timeout.
  virtual HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers,
                                 std::chrono::seconds timeout) = 0;
};

/// Real transport over cpp-httplib. Every call bumps network_call_count().
std::shared_ptr<HttpTransport> make_http_transport();

/// Number of real network requests issued by this process.
std::uint64_t network_call_count();

// ---------------------------------------------------------------- scripted mock

using Responder = std::function<std::string(const GenerationRequest&)>;

/// A scripted route matches on role, a regex searched in the prompt, and a
/// closed temperature bucket. It answers either from a seed-indexed list of
/// canned responses or by calling `responder`.
struct MockRoute {
  std::optional<Role> role;
  std::string pattern = ".*";
  double min_temperature = 0.0;
  double max_temperature = 2.0;
  std::vector<std::string> responses;
  Responder responder;
};

MockRoute mock_route_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- cache

/// Content-addressed response cache. Memory-only unless a directory is given,
/// in which case each entry is a file named by its hex key.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& value);
  std::size_t hits() const { return hits_.load(); }

 private:
  std::optional<std::filesystem::path> dir_;
  std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> memory_;
  std::atomic<std::size_t> hits_{0};
};

// ---------------------------------------------------------------- backend

/// Result of one position in a batch: either text or the error that request raised.
class Completion {
 public:
  static Completion success(std::string text) { return Completion(std::move(text), nullptr); }
  static Completion failure(std::exception_ptr error) { return Completion({}, std::move(error)); }

  bool ok() const { return error_ == nullptr; }
  /// Rethrows the stored error when the request failed.
  const std::string& value() const;
  std::exception_ptr error() const { return error_; }
  std::string error_message() const;

 private:
  Completion(std::string text, std::exception_ptr error) : text_(std::move(text)), error_(std::move(error)) {}
  std::string text_;
  std::exception_ptr error_;
};

class Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Backend(BackendConfig config, std::shared_ptr<HttpTransport> transport = nullptr);

  const BackendConfig& config() const { return config_; }

  // Routes are consulted in insertion order. Configure before sharing the
  // backend across threads.
  void add_route(MockRoute route);

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  /// Cached, retried single completion.
  std::string generate(const GenerationRequest& request);

  /// Positionally aligned results, at most max_concurrency requests in flight.
  std::vector<Completion> batch_generate(const std::vector<GenerationRequest>& requests);

  std::string cache_key(const GenerationRequest& request) const;
  std::size_t cache_hits() const { return cache_.hits(); }

 private:
  struct CompiledRoute {
    MockRoute route;
    std::regex regex;
  };

  std::string call_mock(const GenerationRequest& request) const;
  std::string call_http(const GenerationRequest& request);

  BackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::vector<CompiledRoute> routes_;
  ResponseCache cache_;
  Sleeper sleeper_;
};

using BackendPtr = std::shared_ptr<Backend>;

}  // namespace prof
