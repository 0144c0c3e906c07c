#include "lengthsmith/http_backend.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "fixture_server.hpp"
#include "support.hpp"

using namespace lengthsmith;
using namespace lengthsmith::backend;

namespace {

constexpr const char* kOkBody =
    R"({"choices":[{"message":{"role":"assistant","content":"fixture reply"},"finish_reason":"stop"}]})";

BackendProfile http_profile(const std::string& url) {
  auto p = default_profile(RoleTag::generator);
  p.kind = BackendKind::http;
  p.base_url = url;
  p.model = "fixture-model";
  p.timeout_s = 5;
  p.max_retries = 3;
  p.backoff_base_ms = 10;
  return p;
}

struct RecordedSleeps {
  std::vector<std::chrono::milliseconds> delays;
  std::function<void(std::chrono::milliseconds)> fn() {
    return [this](std::chrono::milliseconds d) { delays.push_back(d); };
  }
};

ChatRequest hello(const BackendProfile& p) { return ChatRequest::from_profile(p, "hello"); }

}  // namespace

TEST(HttpBackend, RetriesTwoRateLimitsThenSucceeds) {
  lstest::FixtureServer server([](int call, const httplib::Request&, httplib::Response& res) {
    if (call <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
    } else {
      res.set_content(kOkBody, "application/json");
    }
  });
  HttpBackend client(http_profile(server.url()), "sk-test");
  RecordedSleeps sleeps;
  client.set_sleeper(sleeps.fn());
  const auto r = client.complete(hello(client.profile()));
  EXPECT_EQ(r.content, "fixture reply");
  EXPECT_EQ(server.calls(), 3);
  ASSERT_EQ(sleeps.delays.size(), 2u);
  EXPECT_GE(sleeps.delays[0].count(), 10);
  EXPECT_LT(sleeps.delays[0].count(), 13);
  EXPECT_GE(sleeps.delays[1].count(), 20);
  EXPECT_LT(sleeps.delays[1].count(), 26);
  EXPECT_EQ(server.auth(), "Bearer sk-test");
  // Every attempt sends the same body.
  const auto bodies = server.bodies();
  EXPECT_EQ(bodies[0], request_body("fixture-model", hello(client.profile())));
  EXPECT_EQ(bodies[0], bodies[2]);
}

TEST(HttpBackend, ServerErrorsExhaustRetries) {
  lstest::FixtureServer server([](int, const httplib::Request&, httplib::Response& res) { res.status = 503; });
  auto p = http_profile(server.url());
  p.max_retries = 2;
  HttpBackend client(p, "");
  RecordedSleeps sleeps;
  client.set_sleeper(sleeps.fn());
  try {
    client.complete(hello(p));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::RetriesExhausted);
  }
  EXPECT_EQ(server.calls(), 3);
  EXPECT_EQ(server.auth(), "");  // no key, no header
}

TEST(HttpBackend, ClientErrorIsNotRetried) {
  lstest::FixtureServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  HttpBackend client(http_profile(server.url()), "");
  try {
    client.complete(hello(client.profile()));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::HttpStatus);
    EXPECT_EQ(e.status(), 400);
    EXPECT_FALSE(e.transient());
  }
  EXPECT_EQ(server.calls(), 1);
}

TEST(HttpBackend, MalformedBodyIsNotRetried) {
  lstest::FixtureServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": 5}", "application/json");
  });
  HttpBackend client(http_profile(server.url()), "");
  try {
    client.complete(hello(client.profile()));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedResponse);
  }
  EXPECT_EQ(server.calls(), 1);
}

TEST(HttpBackend, BaseUrlWithV1Suffix) {
  lstest::FixtureServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content(kOkBody, "application/json");
  });
  HttpBackend client(http_profile(server.url() + "/v1/"), "");
  EXPECT_EQ(client.complete(hello(client.profile())).content, "fixture reply");
}

TEST(HttpBackend, ConnectionRefusedIsTransport) {
  // Bind without listening, so connects are refused.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  auto p = http_profile("http://127.0.0.1:" + std::to_string(port));
  p.max_retries = 1;
  HttpBackend client(p, "");
  RecordedSleeps sleeps;
  client.set_sleeper(sleeps.fn());
  try {
    client.complete(hello(p));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.code(), ErrorCode::RetriesExhausted);
  }
  ::close(fd);
  EXPECT_EQ(sleeps.delays.size(), 1u);
}

TEST(HttpBackend, ApiKeyFromEnvironment) {
  lstest::FixtureServer server([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content(kOkBody, "application/json");
  });
  ::setenv(kApiKeyEnv, "env-key", 1);
  HttpBackend client(http_profile(server.url()));
  ::unsetenv(kApiKeyEnv);
  client.complete(hello(client.profile()));
  EXPECT_EQ(server.auth(), "Bearer env-key");
}

TEST(HttpBackend, BatchAgainstServerKeepsOrder) {
  lstest::FixtureServer server([](int, const httplib::Request& req, httplib::Response& res) {
    // Echo the user content back.
    const auto pos = req.body.find("\"content\":\"");
    const auto end = req.body.find('"', pos + 11);
    const auto content = req.body.substr(pos + 11, end - pos - 11);
    res.set_content(R"({"choices":[{"message":{"content":")" + content + R"("},"finish_reason":"stop"}]})",
                    "application/json");
  });
  HttpBackend client(http_profile(server.url()), "");
  std::vector<ChatRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(ChatRequest::from_profile(client.profile(), "m" + std::to_string(i)));
  const auto res = complete_batch(client, reqs, 4);
  for (int i = 0; i < 10; ++i) {
    ASSERT_TRUE(res[static_cast<std::size_t>(i)].ok()) << res[static_cast<std::size_t>(i)].error;
    EXPECT_EQ(res[static_cast<std::size_t>(i)].response->content, "m" + std::to_string(i));
  }
  EXPECT_EQ(server.calls(), 10);
}

TEST(Backoff, DoublesWithBoundedJitter) {
  EXPECT_EQ(backoff_delay(1000, 1, 0.0).count(), 1000);
  EXPECT_EQ(backoff_delay(1000, 2, 0.0).count(), 2000);
  EXPECT_EQ(backoff_delay(1000, 3, 0.0).count(), 4000);
  EXPECT_EQ(backoff_delay(1000, 1, 1.0).count(), 1250);
  EXPECT_EQ(backoff_delay(0, 4, 0.5).count(), 0);
}
