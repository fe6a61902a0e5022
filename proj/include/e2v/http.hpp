#pragma once

#include "e2v/error.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace e2v {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Blocking HTTP client seam. Connection-level failures throw a retriable
/// RemoteError with status 0; HTTP status codes are returned, not thrown.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers) = 0;
  virtual HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                            const HttpHeaders& headers) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
};

/// Calls `fn` until it returns or throws a non-retriable error, sleeping
/// base_delay * 2^attempt between tries.
template <typename F>
auto with_retries(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const RemoteError& e) {
      if (!e.retriable() || attempt + 1 >= policy.max_attempts) throw;
      std::this_thread::sleep_for(policy.base_delay * (1 << attempt));
    }
  }
}

/// Retriable RemoteError carrying a non-2xx status.
RemoteError status_error(const std::string& context, int status);

inline bool is_success(int status) { return status >= 200 && status < 300; }

}  // namespace e2v
