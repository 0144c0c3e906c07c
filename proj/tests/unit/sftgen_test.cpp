#include "lengthsmith/sftgen.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <map>
#include <set>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/eval.hpp"
#include "lengthsmith/rng.hpp"
#include "lengthsmith/text.hpp"
#include "support.hpp"

using namespace lengthsmith;
using namespace lengthsmith::sftgen;

namespace {

constexpr ConstraintKind kKinds[] = {ConstraintKind::about, ConstraintKind::range,
                                     ConstraintKind::above, ConstraintKind::below};

struct ScriptedSeed : backend::ChatBackend {
  explicit ScriptedSeed(std::function<std::string(const backend::ChatRequest&)> f)
      : fn(std::move(f)), p(lstest::mock_profile(backend::RoleTag::seed)) {}
  backend::ChatResponse complete(const backend::ChatRequest& req) override {
    ++calls;
    backend::ChatResponse r;
    r.content = fn(req);
    return r;
  }
  const backend::BackendProfile& profile() const override { return p; }
  std::function<std::string(const backend::ChatRequest&)> fn;
  backend::BackendProfile p;
  std::atomic<int> calls{0};
};

std::string numbered_lines(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += '\n';
    out += "line " + std::to_string(i);
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string::npos) end = s.size();
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

ResponseRecord extended_child(const ResponseRecord& parent, std::string text) {
  auto r = make_initial_response(parent.id + ".x1", parent.instruction_id, std::move(text), 0);
  r.role = ResponseRole::extended;
  r.micro_iter = 1;
  r.parent_response_id = parent.id;
  return r;
}

}  // namespace

TEST(ConstraintForTarget, RoundsToHundreds) {
  EXPECT_EQ(constraint_for_target(4213, ConstraintKind::about), LengthConstraint::about(4200));
  EXPECT_EQ(constraint_for_target(4213, ConstraintKind::range), LengthConstraint::range(3800, 4600));
  EXPECT_EQ(constraint_for_target(4213, ConstraintKind::above), LengthConstraint::above(3800));
  EXPECT_EQ(constraint_for_target(4213, ConstraintKind::below), LengthConstraint::below(4600));
  EXPECT_THROW(constraint_for_target(0, ConstraintKind::about), std::invalid_argument);
}

TEST(ConstraintForTarget, SmallTargetsFallBackToExactNumbers) {
  // Rounding 7 gives 0, which is not a valid constraint.
  const auto c = constraint_for_target(7, ConstraintKind::about);
  EXPECT_EQ(c, LengthConstraint::about(7));
  const auto r = constraint_for_target(1, ConstraintKind::range);
  EXPECT_TRUE(r.valid());
}

TEST(ConstraintForTarget, PropertyTargetScoresPerfectly) {
  for (std::int64_t t = 1; t <= 12000; ++t) {
    for (auto kind : kKinds) {
      const auto c = constraint_for_target(t, kind);
      ASSERT_TRUE(c.valid()) << t;
      ASSERT_EQ(c.kind, kind);
      ASSERT_DOUBLE_EQ(eval::length_score(t, c), 1.0) << "t=" << t << " kind=" << to_string(kind);
    }
  }
}

TEST(ConstraintPhrase, EnglishAndChinese) {
  EXPECT_EQ(constraint_phrase(LengthConstraint::about(4200), Language::en), "about 4200 words");
  EXPECT_EQ(constraint_phrase(LengthConstraint::range(3800, 4600), Language::en),
            "between 3800 and 4600 words");
  EXPECT_EQ(constraint_phrase(LengthConstraint::above(100), Language::en), "more than 100 words");
  EXPECT_EQ(constraint_phrase(LengthConstraint::below(100), Language::en), "fewer than 100 words");
  EXPECT_EQ(constraint_phrase(LengthConstraint::about(4200), Language::zh), "约4200字");
  EXPECT_EQ(constraint_phrase(LengthConstraint::range(3800, 4600), Language::zh), "3800到4600字之间");
  EXPECT_EQ(constraint_phrase(LengthConstraint::above(100), Language::zh), "超过100字");
  EXPECT_EQ(constraint_phrase(LengthConstraint::below(100), Language::zh), "少于100字");
}

TEST(MentionsConstraint, DigitsMustStandAlone) {
  const auto c = LengthConstraint::about(4200);
  EXPECT_TRUE(mentions_constraint("Write about 4200 words.", c));
  EXPECT_TRUE(mentions_constraint("Write about 4,200 words.", c));
  EXPECT_TRUE(mentions_constraint("4200", c));
  EXPECT_FALSE(mentions_constraint("Write 14200 words.", c));
  EXPECT_FALSE(mentions_constraint("Write 42001 words.", c));
  EXPECT_FALSE(mentions_constraint("no numbers", c));
  const auto r = LengthConstraint::range(3800, 4600);
  EXPECT_TRUE(mentions_constraint("3800到4600字之间", r));
  EXPECT_FALSE(mentions_constraint("at least 3800 words", r));
}

TEST(DropLines, ExactCountForEveryLineTotal) {
  for (std::size_t n = 2; n <= 10000; ++n) {
    const std::size_t expected = std::max<std::size_t>(1, (15 * n) / 100);
    ASSERT_EQ(lines_to_drop(n, 0.15), expected) << n;
  }
  EXPECT_EQ(lines_to_drop(0, 0.15), 0u);
  EXPECT_EQ(lines_to_drop(1, 0.15), 0u);
}

TEST(DropLines, PropertySurvivorsKeepOrder) {
  lstest::Gen g(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(g.range(2, 400));
    const auto text = numbered_lines(n);
    const auto seed = static_cast<std::uint64_t>(g.range(0, 1 << 30));
    const auto out = drop_lines(text, 0.15, seed);
    const auto kept = lines_of(out);
    ASSERT_EQ(kept.size(), n - std::max<std::size_t>(1, (15 * n) / 100));
    int prev = -1;
    for (const auto& l : kept) {
      const int idx = std::stoi(l.substr(5));
      ASSERT_GT(idx, prev);
      prev = idx;
    }
    ASSERT_EQ(drop_lines(text, 0.15, seed), out);
  }
}

TEST(DropLines, BlankLinesIgnoredAndEdgeCases) {
  EXPECT_EQ(drop_lines("only one line", 0.15, 1), "only one line");
  EXPECT_EQ(drop_lines("", 0.15, 1), "");
  const auto out = drop_lines("a\n\n\nb\n\nc", 0.15, 3);
  EXPECT_EQ(lines_of(out).size(), 2u);
  EXPECT_THROW(drop_lines("a\nb", 0.0, 1), std::invalid_argument);
  EXPECT_THROW(drop_lines("a\nb", 1.0, 1), std::invalid_argument);
}

TEST(GeneratorSet, OneExamplePerRecord) {
  const std::vector<Instruction> instrs = {lstest::instruction("i1", "Write a story.")};
  auto r = make_initial_response("r1", "i1", "Once upon a time.", 0);
  const auto set = build_generator_set({r}, instrs, 2);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(check_invariants(set[0]), "");
  EXPECT_EQ(set[0].kind, SftKind::generator);
  EXPECT_EQ(set[0].messages[0].content, "Write a story.");
  EXPECT_EQ(set[0].messages[1].content, "Once upon a time.");
  EXPECT_EQ(set[0].meta.macro_iter, 2);
  EXPECT_EQ(set[0].meta.target_length_words, 4);

  auto orphan = make_initial_response("r2", "missing", "text.", 0);
  EXPECT_THROW(build_generator_set({orphan}, instrs, 0), MissingInstruction);
}

TEST(ExtenderSet, DraftEmbeddedAndShorterThanTarget) {
  const auto prompts = prompts::PromptSet::defaults();
  const std::vector<Instruction> instrs = {lstest::instruction("i1", "Write a report.")};
  std::vector<ResponseRecord> parents;
  std::vector<ResponseRecord> kept;
  lstest::Gen g(5);
  for (int k = 0; k < 20; ++k) {
    std::string base;
    for (int l = 0; l < 12; ++l) base += (l ? "\n" : "") + g.english_text(5, 20);
    auto p = make_initial_response("p" + std::to_string(k), "i1", base, 0);
    parents.push_back(p);
    kept.push_back(extended_child(p, base + "\n" + g.english_text(30, 60)));
  }
  const auto set = build_extender_set(kept, parents, instrs, prompts, 9, 1);
  ASSERT_EQ(set.size(), kept.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i];
    EXPECT_EQ(check_invariants(e), "");
    EXPECT_EQ(e.kind, SftKind::extender);
    const auto draft = drop_lines(parents[i].text, 0.15, derive_seed(9, {"drop", kept[i].id}));
    EXPECT_EQ(e.messages[0].content,
              prompts::render(prompts.extend, {{"prompt", std::string("Write a report.")}, {"initial_response", draft}}));
    EXPECT_GT(corpus::count_words(e.messages[1].content), corpus::count_words(draft));
  }

  auto orphan = extended_child(parents[0], "x");
  orphan.parent_response_id = "nope";
  EXPECT_THROW(build_extender_set({orphan}, parents, instrs, prompts, 9, 1), SchemaViolation);
}

TEST(Rephrase, MockEmbedsConstraint) {
  const auto prompts = prompts::PromptSet::defaults();
  auto seed = backend::make_backend(lstest::mock_profile(backend::RoleTag::seed, 3));
  const auto in = lstest::instruction("i1", "Write a detailed essay about rivers.");
  const auto out = rephrase_with_length(in, 4213, ConstraintKind::range, *seed, prompts);
  EXPECT_EQ(out.id, "i1.c-range-4213");
  EXPECT_EQ(out.parents, std::vector<std::string>{"i1"});
  EXPECT_EQ(out.source, InstructionSource::rephrased);
  ASSERT_TRUE(out.constraint);
  EXPECT_EQ(*out.constraint, LengthConstraint::range(3800, 4600));
  EXPECT_TRUE(mentions_constraint(out.text, *out.constraint));
}

TEST(Rephrase, RetriesThenGivesUp) {
  const auto prompts = prompts::PromptSet::defaults();
  const auto in = lstest::instruction("i1", "Write an essay.");

  ScriptedSeed never([](const backend::ChatRequest&) { return std::string("Write an essay, please."); });
  EXPECT_THROW(rephrase_with_length(in, 1000, ConstraintKind::about, never, prompts),
               ConstraintNotEmbedded);
  EXPECT_EQ(never.calls.load(), 3);

  std::atomic<int> n{0};
  ScriptedSeed late([&](const backend::ChatRequest&) {
    return ++n < 3 ? std::string("nothing") : std::string("Write an essay of about 1,000 words.");
  });
  const auto out = rephrase_with_length(in, 1000, ConstraintKind::about, late, prompts);
  EXPECT_EQ(late.calls.load(), 3);
  EXPECT_EQ(out.text, "Write an essay of about 1,000 words.");
}

TEST(FinalAlignment, RoundRobinKindsAndExactTargets) {
  const auto prompts = prompts::PromptSet::defaults();
  auto seed = backend::make_backend(lstest::mock_profile(backend::RoleTag::seed, 3));
  std::vector<IterationData> its(2);
  for (std::int64_t k = 0; k < 2; ++k) {
    its[k].macro_iter = k;
    for (int i = 0; i < 10; ++i) {
      const auto id = "i" + std::to_string(k) + "-" + std::to_string(i);
      its[k].instructions.push_back(lstest::instruction(id, "Write a long essay about " + id + "."));
      its[k].initial.push_back(make_initial_response(
          "r-" + id, id, backend::mock_generate(static_cast<std::uint64_t>(i + 10 * k), 50 + 37 * i, Language::en), k));
    }
    // A filtered record repeating an id seen earlier is pooled once.
    its[k].filtered.push_back(its[k].initial[0]);
  }
  const auto out = collect_final_alignment(its, *seed, prompts, 3);
  ASSERT_EQ(out.size(), 20u);
  std::map<ConstraintKind, int> per_kind;
  std::set<std::string> ids;
  for (const auto& e : out) {
    EXPECT_EQ(check_invariants(e), "");
    EXPECT_EQ(e.kind, SftKind::final_alignment);
    ASSERT_TRUE(e.meta.constraint);
    ++per_kind[e.meta.constraint->kind];
    EXPECT_EQ(e.meta.target_length_words,
              static_cast<std::int64_t>(corpus::count_words(e.messages[1].content)));
    EXPECT_TRUE(mentions_constraint(e.messages[0].content, *e.meta.constraint));
    EXPECT_TRUE(ids.insert(e.meta.response_id).second);
  }
  for (auto kind : kKinds) {
    EXPECT_GE(per_kind[kind], 4);
    EXPECT_LE(per_kind[kind], 6);
  }

  EXPECT_THROW(collect_final_alignment({}, *seed, prompts, 1), Error);
}

TEST(SftCodec, RoundTrip) {
  SftExample e;
  e.kind = SftKind::final_alignment;
  e.messages = {{backend::MessageRole::user, "写一篇文章\n\"quoted\""},
                {backend::MessageRole::assistant, "好的。"}};
  e.meta = {3, "i", "r", 2, LengthConstraint::range(100, 200)};
  const auto line = JsonlCodec<SftExample>::encode(e);
  EXPECT_EQ(JsonlCodec<SftExample>::decode(line), e);
  EXPECT_EQ(line.find('\n'), std::string::npos);

  e.kind = SftKind::generator;
  e.meta.constraint.reset();
  EXPECT_EQ(JsonlCodec<SftExample>::decode(JsonlCodec<SftExample>::encode(e)), e);
  EXPECT_THROW(JsonlCodec<SftExample>::decode(R"({"schema_version":"1","kind":"nope"})"), SchemaViolation);
}
