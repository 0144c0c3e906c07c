#include "lengthsmith/backend.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "json_util.hpp"
#include "lengthsmith/http_backend.hpp"
#include "lengthsmith/mock_backend.hpp"

namespace lengthsmith::backend {

using detail::json;
using detail::ObjectReader;
using detail::ordered_json;

std::string_view to_string(BackendKind v) { return v == BackendKind::http ? "http" : "mock"; }

std::string_view to_string(RoleTag v) {
  switch (v) {
    case RoleTag::generator: return "generator";
    case RoleTag::extender: return "extender";
    case RoleTag::judge: return "judge";
    case RoleTag::seed: return "seed";
  }
  return "?";
}

std::string_view to_string(MessageRole v) {
  switch (v) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "?";
}

std::string_view to_string(FinishReason v) {
  switch (v) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::other: return "other";
  }
  return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "http") return BackendKind::http;
  if (s == "mock") return BackendKind::mock;
  return std::nullopt;
}

std::optional<RoleTag> parse_role_tag(std::string_view s) {
  for (auto r : {RoleTag::generator, RoleTag::extender, RoleTag::judge, RoleTag::seed}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::optional<MessageRole> parse_message_role(std::string_view s) {
  for (auto r : {MessageRole::system, MessageRole::user, MessageRole::assistant}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::string BackendProfile::check() const {
  if (name.empty()) return "name must be nonempty";
  if (kind == BackendKind::http && base_url.empty()) return "http profiles need base_url";
  if (!(temperature >= 0.0)) return "temperature must be >= 0";
  if (!(top_p > 0.0 && top_p <= 1.0)) return "top_p must be in (0, 1]";
  if (max_tokens <= 0) return "max_tokens must be positive";
  if (timeout_s <= 0) return "timeout_s must be positive";
  if (max_retries < 0 || max_retries > 10) return "max_retries must be in [0, 10]";
  if (backoff_base_ms < 0) return "backoff_base_ms must be >= 0";
  if (kind == BackendKind::mock) {
    if (mock.target_words <= 0) return "mock.target_words must be positive";
    if (!(mock.length_spread >= 0.0 && mock.length_spread < 1.0)) {
      return "mock.length_spread must be in [0, 1)";
    }
    if (!(mock.extend_factor > 0.0)) return "mock.extend_factor must be positive";
    if (mock.judge_bias != "longer" && mock.judge_bias != "first") {
      return "mock.judge_bias must be 'longer' or 'first'";
    }
    if (mock.latency_ms < 0) return "mock.latency_ms must be >= 0";
  }
  return {};
}

BackendProfile default_profile(RoleTag role) {
  BackendProfile p;
  p.role_tag = role;
  p.name = std::string(to_string(role));
  p.model = "mock-" + p.name;
  if (role == RoleTag::judge) p.temperature = 0.0;
  return p;
}

}  // namespace lengthsmith::backend

namespace lengthsmith::detail {

ordered_json profile_to_json_value(const backend::BackendProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  j["kind"] = std::string(to_string(p.kind));
  if (!p.base_url.empty()) j["base_url"] = p.base_url;
  j["model"] = p.model;
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["max_tokens"] = p.max_tokens;
  j["timeout_s"] = p.timeout_s;
  j["max_retries"] = p.max_retries;
  j["role_tag"] = std::string(to_string(p.role_tag));
  j["backoff_base_ms"] = p.backoff_base_ms;
  if (p.kind == backend::BackendKind::mock) {
    ordered_json m;
    m["seed"] = p.mock.seed;
    m["target_words"] = p.mock.target_words;
    m["length_spread"] = p.mock.length_spread;
    m["extend_factor"] = p.mock.extend_factor;
    m["judge_bias"] = p.mock.judge_bias;
    m["latency_ms"] = p.mock.latency_ms;
    j["mock"] = m;
  }
  return j;
}

backend::BackendProfile profile_from_json_value(const json& j, const std::string& path) {
  using namespace backend;
  ObjectReader r(j, path);
  BackendProfile p;
  p.name = r.str("name");
  p.kind = parse_enum<BackendKind>(r.child("kind"), r.str("kind"), parse_backend_kind);
  p.base_url = r.opt_str("base_url").value_or("");
  p.model = r.str("model");
  p.temperature = r.opt_number("temperature").value_or(p.temperature);
  p.top_p = r.opt_number("top_p").value_or(p.top_p);
  p.max_tokens = r.opt_integer("max_tokens").value_or(p.max_tokens);
  p.timeout_s = r.opt_integer("timeout_s").value_or(p.timeout_s);
  p.max_retries = r.opt_integer("max_retries").value_or(p.max_retries);
  p.role_tag = parse_enum<RoleTag>(r.child("role_tag"), r.str("role_tag"), parse_role_tag);
  p.backoff_base_ms = r.opt_integer("backoff_base_ms").value_or(p.backoff_base_ms);
  if (!r.has("temperature") && p.role_tag == RoleTag::judge) p.temperature = 0.0;
  if (const json* m = r.opt_object("mock")) {
    ObjectReader mr(*m, r.child("mock"));
    const auto seed = mr.opt_integer("seed");
    if (seed) p.mock.seed = static_cast<std::uint64_t>(*seed);
    p.mock.target_words = mr.opt_integer("target_words").value_or(p.mock.target_words);
    p.mock.length_spread = mr.opt_number("length_spread").value_or(p.mock.length_spread);
    p.mock.extend_factor = mr.opt_number("extend_factor").value_or(p.mock.extend_factor);
    p.mock.judge_bias = mr.opt_str("judge_bias").value_or(p.mock.judge_bias);
    p.mock.latency_ms = mr.opt_integer("latency_ms").value_or(p.mock.latency_ms);
    mr.finish();
  }
  r.finish();
  require_ok(path, p.check());
  return p;
}

}  // namespace lengthsmith::detail

namespace lengthsmith::backend {

std::string profile_to_json(const BackendProfile& p) {
  return detail::dump(detail::profile_to_json_value(p));
}

BackendProfile profile_from_json(std::string_view text, const std::string& path) {
  return detail::profile_from_json_value(detail::parse_json(text, path), path);
}

ChatRequest ChatRequest::from_profile(const BackendProfile& p, std::string user_content, Task task,
                                      std::map<std::string, std::string> slots) {
  ChatRequest req;
  req.messages.push_back({MessageRole::user, std::move(user_content)});
  req.temperature = p.temperature;
  req.top_p = p.top_p;
  req.max_tokens = p.max_tokens;
  req.task = task;
  req.slots = std::move(slots);
  return req;
}

std::string request_body(std::string_view model, const ChatRequest& req) {
  ordered_json j;
  j["model"] = std::string(model);
  j["messages"] = ordered_json::array();
  for (const auto& m : req.messages) {
    ordered_json msg;
    msg["role"] = std::string(to_string(m.role));
    msg["content"] = m.content;
    j["messages"].push_back(std::move(msg));
  }
  j["temperature"] = req.temperature;
  j["top_p"] = req.top_p;
  j["max_tokens"] = req.max_tokens;
  return detail::dump(j);
}

ChatResponse parse_response_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw BackendError(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw BackendError(ErrorCode::MalformedResponse, "response has no choices");
  }
  const json& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw BackendError(ErrorCode::MalformedResponse, "choices[0].message missing");
  }
  const json& message = choice["message"];
  ChatResponse out;
  if (message.contains("content") && message["content"].is_string()) {
    out.content = message["content"].get<std::string>();
  } else if (!(message.contains("content") && message["content"].is_null())) {
    throw BackendError(ErrorCode::MalformedResponse, "choices[0].message.content missing");
  }
  std::string finish;
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    finish = choice["finish_reason"].get<std::string>();
  }
  out.finish_reason = finish == "stop"     ? FinishReason::stop
                      : finish == "length" ? FinishReason::length
                                           : FinishReason::other;
  if (out.content.empty()) out.finish_reason = FinishReason::other;
  if (j.contains("usage") && j["usage"].is_object()) {
    const json& u = j["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) {
      out.usage.prompt_tokens = u["prompt_tokens"].get<std::int64_t>();
    }
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer()) {
      out.usage.completion_tokens = u["completion_tokens"].get<std::int64_t>();
    }
  }
  return out;
}

BackendPtr make_backend(const BackendProfile& profile) {
  if (auto problem = profile.check(); !problem.empty()) {
    throw Error(ErrorCode::Config, "profile '" + profile.name + "': " + problem);
  }
  if (profile.kind == BackendKind::http) return std::make_shared<HttpBackend>(profile);
  return std::make_shared<MockBackend>(profile);
}

ChatResponse complete(const BackendProfile& profile, const ChatRequest& req) {
  return make_backend(profile)->complete(req);
}

std::vector<BatchResult> complete_batch(ChatBackend& backend, std::span<const ChatRequest> requests,
                                        std::size_t parallelism) {
  std::vector<BatchResult> results(requests.size());
  if (requests.empty()) return results;
  parallelism = std::clamp<std::size_t>(parallelism, 1, requests.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      BatchResult& out = results[i];
      try {
        out.response = backend.complete(requests[i]);
      } catch (const Error& e) {
        out.error_code = e.code();
        out.error = e.what();
      } catch (const std::exception& e) {
        out.error_code = ErrorCode::Transport;
        out.error = e.what();
      }
    }
  };

  if (parallelism == 1) {
    worker();
    return results;
  }
  std::vector<std::jthread> threads;
  threads.reserve(parallelism);
  for (std::size_t t = 0; t < parallelism; ++t) threads.emplace_back(worker);
  threads.clear();
  return results;
}

}  // namespace lengthsmith::backend
