#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "e2v/http.hpp"

namespace e2v {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw RemoteError("URL without scheme: " + url, 0, false);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const HttpHeaders& headers) override {
    const auto parts = split_url(url);
    auto client = make_client(parts.origin);
    return unwrap(client.Get(parts.path, to_headers(headers)), url);
  }

  HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                    const HttpHeaders& headers) override {
    const auto parts = split_url(url);
    auto client = make_client(parts.origin);
    return unwrap(client.Post(parts.path, to_headers(headers), body, content_type), url);
  }

 private:
  httplib::Client make_client(const std::string& origin) const {
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    client.set_follow_location(true);
    return client;
  }

  static httplib::Headers to_headers(const HttpHeaders& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
  }

  static HttpResponse unwrap(const httplib::Result& result, const std::string& url) {
    if (!result) {
      throw RemoteError("request to " + url + " failed: " + httplib::to_string(result.error()), 0, true);
    }
    return {result->status, result->body};
  }

  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

RemoteError status_error(const std::string& context, int status) {
  return RemoteError(context + ": HTTP status " + std::to_string(status), status, true);
}

}  // namespace e2v
