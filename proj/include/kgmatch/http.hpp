#pragma once

// Endpoint parsing and a thin retrying JSON POST on top of cpp-httplib.

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

namespace kgmatch::http {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

inline Endpoint parse_endpoint(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw std::invalid_argument("endpoint URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Transport-level failure: the server could not be reached or timed out.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connect or read timeout.
class Timeout : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Non-2xx response.
class StatusError : public std::runtime_error {
 public:
  StatusError(int status, const std::string& body)
      : std::runtime_error("HTTP status " + std::to_string(status) + (body.empty() ? "" : ": " + body.substr(0, 200))),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Response body that is not the JSON we expect.
class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClientOptions {
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::string bearer_token;
};

/// POSTs `body` and returns `decode(parsed JSON response)`. Transport,
/// status and malformed-response errors (including MalformedResponse thrown
/// by `decode`) are retried with exponential backoff up to `max_attempts`;
/// the last error is rethrown. `request_key` is sent as Idempotency-Key so a
/// retried request can be deduplicated server side.
template <typename Decode>
auto post_json(const Endpoint& endpoint, const nlohmann::json& body, const ClientOptions& options,
               const std::string& request_key, Decode&& decode) -> decltype(decode(std::declval<const nlohmann::json&>())) {
  httplib::Client client(endpoint.origin);
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  httplib::Headers headers;
  if (!options.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + options.bearer_token);
  if (!request_key.empty()) headers.emplace("Idempotency-Key", request_key);
  const std::string payload = body.dump();

  auto backoff = options.initial_backoff;
  std::exception_ptr last;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    try {
      auto res = client.Post(endpoint.path, headers, payload, "application/json");
      if (!res && (res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read))
        throw Timeout("request to " + endpoint.origin + endpoint.path + " timed out: " + httplib::to_string(res.error()));
      if (!res) throw TransportError("request to " + endpoint.origin + endpoint.path + " failed: " + httplib::to_string(res.error()));
      if (res->status < 200 || res->status >= 300) throw StatusError(res->status, res->body);
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
      }
      try {
        return decode(parsed);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("unexpected response shape: ") + e.what());
      }
    } catch (const TransportError&) {
      last = std::current_exception();
    } catch (const StatusError&) {
      last = std::current_exception();
    } catch (const MalformedResponse&) {
      last = std::current_exception();
    }
  }
  std::rethrow_exception(last);
}

}  // namespace kgmatch::http
