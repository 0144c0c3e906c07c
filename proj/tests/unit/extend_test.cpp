#include "lengthsmith/extend.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <stdexcept>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/mock_backend.hpp"
#include "lengthsmith/text.hpp"
#include "support.hpp"

using namespace lengthsmith;
using namespace lengthsmith::extend;
using backend::ChatRequest;
using backend::Task;

namespace {

struct ScriptedExtender : backend::ChatBackend {
  ScriptedExtender(std::function<std::string(const ChatRequest&)> s1,
                   std::function<std::string(const ChatRequest&)> s2)
      : stage1(std::move(s1)), stage2(std::move(s2)), p(lstest::mock_profile(backend::RoleTag::extender)) {}
  backend::ChatResponse complete(const ChatRequest& req) override {
    backend::ChatResponse r;
    if (req.task == Task::extend) {
      ++stage1_calls;
      r.content = stage1(req);
    } else if (req.task == Task::extend_stage2) {
      ++stage2_calls;
      r.content = stage2(req);
    } else {
      throw std::logic_error("unexpected task");
    }
    return r;
  }
  const backend::BackendProfile& profile() const override { return p; }
  std::function<std::string(const ChatRequest&)> stage1, stage2;
  backend::BackendProfile p;
  std::atomic<int> stage1_calls{0}, stage2_calls{0};
};

const prompts::PromptSet& defaults() {
  static const auto p = prompts::PromptSet::defaults();
  return p;
}

}  // namespace

TEST(Seam, OneBlankLine) {
  EXPECT_EQ(seam_continuation("  more text \n"), "\n\nmore text");
  EXPECT_EQ(seam_continuation(" \n\t"), "");
}

TEST(Requests, SlotsAndTemplates) {
  const auto instr = lstest::instruction("i", "Write about tides.");
  const auto p = lstest::mock_profile(backend::RoleTag::extender);
  const auto r1 = stage1_request(instr, "First half.", p, defaults());
  EXPECT_EQ(r1.task, Task::extend);
  EXPECT_EQ(r1.slots.at("initial_response"), "First half.");
  EXPECT_NE(r1.messages[0].content.find("Write about tides."), std::string::npos);
  EXPECT_NE(r1.messages[0].content.find("First half."), std::string::npos);
  const auto r2 = stage2_request(instr, "Whole.", "Demo.", p, defaults());
  EXPECT_EQ(r2.task, Task::extend_stage2);
  EXPECT_EQ(r2.slots.at("draft"), "Demo.");
  EXPECT_NE(r2.messages[0].content.find("Demo."), std::string::npos);
}

TEST(ExtendOnce, MockTraceMechanics) {
  backend::MockBackend m(lstest::mock_profile(backend::RoleTag::extender, 3));
  const auto instr = lstest::instruction("i", "Write a travel story.");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto y = make_initial_response("r", "i", backend::mock_generate(seed, 300 + 40 * seed), 0);
    const auto t = extend_once(instr, y, m, defaults());
    ASSERT_TRUE(t.accepted) << t.note;
    EXPECT_EQ(t.stage1_input, corpus::split_half_at_punct(y.text).first);
    EXPECT_EQ(t.final_text.rfind(corpus::truncate_two_thirds(t.stage1_output), 0), 0u);
    EXPECT_GT(corpus::count_words(t.final_text), corpus::count_words(y.text));
    EXPECT_EQ(check_invariants(t, corpus::count_words(y.text)), "");
    EXPECT_EQ(t.input_response_id, "r");
    EXPECT_EQ(t.round, 1);
  }
}

TEST(ExtendOnce, RejectsNoSplitPoint) {
  backend::MockBackend m(lstest::mock_profile(backend::RoleTag::extender));
  const auto t = extend_once(lstest::instruction("i", "x"), make_initial_response("r", "i", "no stop here", 0), m,
                             defaults());
  EXPECT_FALSE(t.accepted);
  EXPECT_NE(t.note.find("no split point"), std::string::npos);
  EXPECT_EQ(check_invariants(t, 3), "");
}

TEST(ExtendOnce, RejectsEmptyStage1AndShortResult) {
  const auto y = make_initial_response("r", "i", "One two three. Four five six. Seven eight nine.", 0);
  const auto instr = lstest::instruction("i", "x");

  ScriptedExtender empty([](const ChatRequest&) { return std::string("   "); },
                         [](const ChatRequest&) { return std::string("never"); });
  auto t = extend_once(instr, y, empty, defaults());
  EXPECT_FALSE(t.accepted);
  EXPECT_EQ(t.note, "stage 1 returned no text");
  EXPECT_EQ(empty.stage2_calls, 0);

  ScriptedExtender shorter([](const ChatRequest&) { return std::string("Tiny. Bit."); },
                           [](const ChatRequest&) { return std::string("End."); });
  t = extend_once(instr, y, shorter, defaults());
  EXPECT_FALSE(t.accepted);
  EXPECT_EQ(t.note, "extension is not longer than its input");
  EXPECT_EQ(t.final_text, t.demonstration + "\n\nEnd.");
}

TEST(ExtendOnce, StageErrorsBecomeNotes) {
  struct Failing : backend::ChatBackend {
    backend::ChatResponse complete(const ChatRequest&) override {
      throw BackendError(ErrorCode::Timeout, "deadline");
    }
    const backend::BackendProfile& profile() const override { return p; }
    backend::BackendProfile p = lstest::mock_profile(backend::RoleTag::extender);
  } failing;
  const auto y = make_initial_response("r", "i", "A b. C d. E f.", 0);
  const auto t = extend_once(lstest::instruction("i", "x"), y, failing, defaults());
  EXPECT_FALSE(t.accepted);
  EXPECT_NE(t.note.find("stage 1 backend error"), std::string::npos);
}

TEST(MicroIterate, ChainsRoundsAndNamesRecords) {
  backend::MockBackend m(lstest::mock_profile(backend::RoleTag::extender, 4));
  const auto instr = lstest::instruction("i", "Write.");
  auto y = make_initial_response("r0-i", "i", backend::mock_generate(1, 400), 1);
  const auto res = micro_iterate(instr, y, m, defaults(), 3);
  ASSERT_TRUE(res.extended);
  ASSERT_EQ(res.traces.size(), 3u);
  EXPECT_EQ(res.record.id, "r0-i.x3");
  EXPECT_EQ(res.record.micro_iter, 3);
  EXPECT_EQ(res.record.macro_iter, 1);
  EXPECT_EQ(res.record.parent_response_id, "r0-i");
  EXPECT_EQ(res.record.role, ResponseRole::extended);
  EXPECT_EQ(check_invariants(res.record), "");
  EXPECT_EQ(res.traces[1].input_response_id, "r0-i.x1");
  EXPECT_EQ(res.traces[2].input_response_id, "r0-i.x2");
  EXPECT_EQ(res.traces[1].stage1_input, corpus::split_half_at_punct(res.traces[0].final_text).first);
  EXPECT_EQ(res.record.text, res.traces[2].final_text);
  // Each round grows by roughly the extend factor.
  EXPECT_GT(res.record.length_words, 2 * y.length_words);
  EXPECT_THROW(micro_iterate(instr, y, m, defaults(), 0), std::invalid_argument);
}

TEST(MicroIterate, FirstRejectionStops) {
  int calls = 0;
  ScriptedExtender ext(
      [&](const ChatRequest& req) {
        ++calls;
        return calls == 1 ? req.slots.at("initial_response") + " Extra words were added here." : std::string();
      },
      [](const ChatRequest& req) { return req.slots.at("initial_response"); });
  const auto y = make_initial_response("r", "i", "Alpha beta. Gamma delta. Epsilon zeta.", 0);
  const auto res = micro_iterate(lstest::instruction("i", "x"), y, ext, defaults(), 3);
  ASSERT_EQ(res.traces.size(), 2u);
  EXPECT_TRUE(res.traces[0].accepted);
  EXPECT_FALSE(res.traces[1].accepted);
  EXPECT_EQ(res.record.id, "r.x1");

  ScriptedExtender never([](const ChatRequest&) { return std::string(); },
                         [](const ChatRequest&) { return std::string(); });
  const auto none = micro_iterate(lstest::instruction("i", "x"), y, never, defaults(), 3);
  EXPECT_FALSE(none.extended);
  EXPECT_EQ(none.record, y);
  EXPECT_EQ(none.traces.size(), 1u);
}

TEST(ExtendCohort, MatchesPerItemMicroIterate) {
  backend::MockBackend m(lstest::mock_profile(backend::RoleTag::extender, 6));
  std::vector<Instruction> instrs;
  std::vector<CohortItem> items;
  for (int i = 0; i < 12; ++i) instrs.push_back(lstest::instruction("i" + std::to_string(i), "Write."));
  for (int i = 0; i < 12; ++i) {
    const std::string text = i == 5 ? "unsplittable text" : backend::mock_generate(static_cast<std::uint64_t>(i), 100 + 30 * i);
    items.push_back({&instrs[static_cast<std::size_t>(i)], make_initial_response("r" + std::to_string(i),
                                                                                 instrs[static_cast<std::size_t>(i)].id, text, 0)});
  }
  const auto batch = extend_cohort(items, m, defaults(), 2, 4);
  ASSERT_EQ(batch.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto single = micro_iterate(*items[i].instruction, items[i].response, m, defaults(), 2);
    EXPECT_EQ(batch[i].record, single.record);
    EXPECT_EQ(batch[i].traces, single.traces);
  }
  EXPECT_FALSE(batch[5].extended);
}

TEST(TraceCodec, RoundTripAndConsistency) {
  backend::MockBackend m(lstest::mock_profile(backend::RoleTag::extender));
  const auto y = make_initial_response("r", "i", backend::mock_generate(2, 200), 0);
  const auto t = extend_once(lstest::instruction("i", "x"), y, m, defaults());
  const auto line = to_jsonl(t);
  EXPECT_EQ(from_jsonl<ExtensionTrace>(line), t);

  auto broken = t;
  broken.final_text += " tampered";
  EXPECT_THROW(from_jsonl<ExtensionTrace>(to_jsonl(broken)), SchemaViolation);
  broken.accepted = false;
  EXPECT_NO_THROW(from_jsonl<ExtensionTrace>(to_jsonl(broken)));
}
