#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <regex>

#include "prof/backend.hpp"
#include "prof/error.hpp"

namespace prof {

namespace {

std::atomic<std::uint64_t> g_network_calls{0};

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers,
                         std::chrono::seconds timeout) override {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) throw ConfigError("unsupported url: " + url);
    const std::string origin = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) {
      if (k != "Content-Type") h.emplace(k, v);
    }
    ++g_network_calls;
    auto result = client.Post(path, h, body, "application/json");
    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw Timeout(httplib::to_string(err) + " for " + url);
      }
      // Connection-level failures are treated as retryable server trouble.
      return HttpResponse{0, httplib::to_string(err)};
    }
    return HttpResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

std::uint64_t network_call_count() { return g_network_calls.load(); }

}  // namespace prof
