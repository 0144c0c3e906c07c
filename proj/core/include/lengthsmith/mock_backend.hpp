#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/records.hpp"

namespace lengthsmith::backend {

// Sentence-structured filler of exactly `target_words` words (one script,
// paragraphs separated by blank lines), fully determined by the seed.
std::string mock_generate(std::uint64_t seed, std::int64_t target_words,
                          Language language = Language::en);

// Keeps every sentence of `input` in order and interleaves filler sentences
// after them until the text is about factor * count_words(input) words long.
// factor <= 1 returns the input unchanged.
std::string mock_extend(std::string_view input, double factor, std::uint64_t seed = 0);

// Deterministic stand-in for every model role. Responses depend only on the
// profile's MockParams and the request (task, slots, messages), never on call
// order, so batch parallelism cannot change outputs.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(BackendProfile profile);

  ChatResponse complete(const ChatRequest& req) override;
  const BackendProfile& profile() const override { return profile_; }

  std::int64_t calls() const { return calls_.load(); }
  std::int64_t max_in_flight() const { return max_in_flight_.load(); }

 private:
  ChatResponse respond(const ChatRequest& req) const;

  BackendProfile profile_;
  std::atomic<std::int64_t> calls_{0};
  std::atomic<std::int64_t> in_flight_{0};
  std::atomic<std::int64_t> max_in_flight_{0};
};

}  // namespace lengthsmith::backend
