#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "lengthsmith/backend.hpp"

namespace lengthsmith::backend {

inline constexpr const char* kApiKeyEnv = "LENGTHSMITH_API_KEY";

// Delay before retry number `attempt` (1-based): base * 2^(attempt-1), scaled
// by a jitter factor in [1, 1.25).
std::chrono::milliseconds backoff_delay(std::int64_t base_ms, int attempt, double jitter01);

// Client for POST {base_url}/v1/chat/completions. Retries 429, 5xx,
// connection failures, and timeouts up to profile.max_retries times, then
// throws BackendError(RetriesExhausted). Other statuses throw HttpStatus
// immediately.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(BackendProfile profile);
  // The key is read from LENGTHSMITH_API_KEY when not given.
  HttpBackend(BackendProfile profile, std::string api_key);

  ChatResponse complete(const ChatRequest& req) override;
  const BackendProfile& profile() const override { return profile_; }

  // Replaces std::this_thread::sleep_for, for tests.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
    sleeper_ = std::move(sleeper);
  }

 private:
  ChatResponse attempt(const std::string& body) const;

  BackendProfile profile_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
};

}  // namespace lengthsmith::backend
