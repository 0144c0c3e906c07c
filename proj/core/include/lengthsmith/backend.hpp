#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lengthsmith/errors.hpp"

namespace lengthsmith::backend {

enum class BackendKind { http, mock };
enum class RoleTag { generator, extender, judge, seed };
enum class MessageRole { system, user, assistant };
enum class FinishReason { stop, length, other };

std::string_view to_string(BackendKind v);
std::string_view to_string(RoleTag v);
std::string_view to_string(MessageRole v);
std::string_view to_string(FinishReason v);
std::optional<BackendKind> parse_backend_kind(std::string_view s);
std::optional<RoleTag> parse_role_tag(std::string_view s);
std::optional<MessageRole> parse_message_role(std::string_view s);

// Knobs of the deterministic in-process model. A trainer hook "improves" a
// mock model by rewriting these.
struct MockParams {
  std::uint64_t seed = 0;
  std::int64_t target_words = 1000;  // mean length of generated responses
  double length_spread = 0.5;        // per-instruction target in mean*(1 +/- spread)
  double extend_factor = 1.5;        // output/input length ratio of an extension call
  std::string judge_bias = "longer"; // pairwise judge: "longer" or "first"
  std::int64_t latency_ms = 0;

  bool operator==(const MockParams&) const = default;
};

struct BackendProfile {
  std::string name;
  BackendKind kind = BackendKind::mock;
  std::string base_url;
  std::string model;
  double temperature = 0.8;
  double top_p = 0.95;
  std::int64_t max_tokens = 16384;
  std::int64_t timeout_s = 600;
  std::int64_t max_retries = 3;
  RoleTag role_tag = RoleTag::generator;
  std::int64_t backoff_base_ms = 1000;
  MockParams mock;

  // Empty when valid, otherwise the first violated invariant.
  std::string check() const;
  bool operator==(const BackendProfile&) const = default;
};

// Generation defaults; judges run at temperature 0.
BackendProfile default_profile(RoleTag role);

std::string profile_to_json(const BackendProfile& p);
BackendProfile profile_from_json(std::string_view text, const std::string& path = "$");

struct ChatMessage {
  MessageRole role = MessageRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// What a request is for. Real servers never see this; the mock model uses it
// (with `slots`, the raw template values) instead of parsing prompt prose.
enum class Task {
  generic,
  generate,
  self_instruct,
  validate,
  extend,
  extend_stage2,
  rephrase,
  judge_quality,
  judge_pairwise,
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.8;
  double top_p = 0.95;
  std::int64_t max_tokens = 16384;

  Task task = Task::generic;
  std::map<std::string, std::string> slots;

  static ChatRequest from_profile(const BackendProfile& p, std::string user_content,
                                  Task task = Task::generic,
                                  std::map<std::string, std::string> slots = {});
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::stop;
  Usage usage;
};

// OpenAI-compatible chat-completions body: model, messages, temperature,
// top_p, max_tokens in that order. Byte-stable for a given request.
std::string request_body(std::string_view model, const ChatRequest& req);

// Parses choices[0].message.content and finish_reason; throws
// BackendError(MalformedResponse).
ChatResponse parse_response_body(std::string_view body);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Throws BackendError. Must be safe to call concurrently.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual const BackendProfile& profile() const = 0;
};

using BackendPtr = std::shared_ptr<ChatBackend>;

// Builds the HTTP or mock client for a profile.
BackendPtr make_backend(const BackendProfile& profile);

// Builds a request from the profile's decoding parameters and completes it.
ChatResponse complete(const BackendProfile& profile, const ChatRequest& req);

struct BatchResult {
  std::optional<ChatResponse> response;
  std::optional<ErrorCode> error_code;
  std::string error;

  bool ok() const noexcept { return response.has_value(); }
};

// At most `parallelism` requests are in flight; results come back in input
// order and per-item failures are captured rather than thrown.
std::vector<BatchResult> complete_batch(ChatBackend& backend, std::span<const ChatRequest> requests,
                                        std::size_t parallelism);

}  // namespace lengthsmith::backend
