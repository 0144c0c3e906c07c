#include "lengthsmith/http_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"

namespace lengthsmith::backend {

namespace {

double jitter() {
  thread_local std::mt19937_64 engine{std::random_device{}()};
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace

std::chrono::milliseconds backoff_delay(std::int64_t base_ms, int attempt, double jitter01) {
  const double scale = std::ldexp(1.0, attempt - 1) * (1.0 + 0.25 * jitter01);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::round(base_ms * scale)));
}

HttpBackend::HttpBackend(BackendProfile profile)
    : HttpBackend(std::move(profile), [] {
        const char* key = std::getenv(kApiKeyEnv);
        return std::string(key != nullptr ? key : "");
      }()) {}

HttpBackend::HttpBackend(BackendProfile profile, std::string api_key)
    : profile_(std::move(profile)),
      api_key_(std::move(api_key)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  std::string url = profile_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = url;
  } else {
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
  }
  // A base_url that already names the /v1 root is accepted as-is.
  if (path_prefix_.size() >= 3 && path_prefix_.compare(path_prefix_.size() - 3, 3, "/v1") == 0) {
    path_prefix_.resize(path_prefix_.size() - 3);
  }
}

ChatResponse HttpBackend::attempt(const std::string& body) const {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(static_cast<time_t>(profile_.timeout_s), 0);
  client.set_read_timeout(static_cast<time_t>(profile_.timeout_s), 0);
  client.set_write_timeout(static_cast<time_t>(profile_.timeout_s), 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_prefix_ + "/v1/chat/completions", headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw BackendError(ErrorCode::Timeout, "request timed out or read failed: " + what);
    }
    throw BackendError(ErrorCode::Transport, "transport error: " + what);
  }
  if (res->status != 200) throw BackendError::http_status(res->status, res->body.substr(0, 512));
  return parse_response_body(res->body);
}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
  const std::string body = request_body(profile_.model, req);
  for (int tries = 0;; ++tries) {
    try {
      return attempt(body);
    } catch (const BackendError& e) {
      if (!e.transient()) throw;
      if (tries >= profile_.max_retries) {
        throw BackendError(ErrorCode::RetriesExhausted,
                           "gave up after " + std::to_string(tries + 1) + " attempts: " + e.what());
      }
      const auto delay = backoff_delay(profile_.backoff_base_ms, tries + 1, jitter());
      spdlog::debug("{}: transient failure ({}), retrying in {} ms", profile_.name, e.what(),
                    delay.count());
      sleeper_(delay);
    }
  }
}

}  // namespace lengthsmith::backend
