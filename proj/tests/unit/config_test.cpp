#include "lengthsmith/config.hpp"

#include <gtest/gtest.h>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/run_dir.hpp"
#include "lengthsmith/sftgen.hpp"
#include "lengthsmith/trainer_hook.hpp"
#include "support.hpp"

using namespace lengthsmith;

namespace {

TrainerHookRequest hook_request(const lstest::TempDir& dir, std::string command) {
  TrainerHookRequest req;
  req.command_template = std::move(command);
  req.generator_sft = dir / "sft_generator.jsonl";
  req.extender_sft = dir / "sft_extender.jsonl";
  req.iter = 0;
  req.work_dir = dir.path();
  req.current.generator = lstest::mock_profile(backend::RoleTag::generator, 1);
  req.current.generator.mock.target_words = 1000;
  req.current.extender = lstest::mock_profile(backend::RoleTag::extender, 2);
  return req;
}

void write_sft(const std::filesystem::path& path, std::int64_t words) {
  sftgen::SftExample e;
  e.messages = {{backend::MessageRole::user, "Write."},
                {backend::MessageRole::assistant, backend::mock_generate(1, words)}};
  e.meta.target_length_words = words;
  write_jsonl(path, std::vector<sftgen::SftExample>{e});
}

}  // namespace

TEST(Config, ParsesMockConfigFromRepository) {
  const auto c = load_config(std::filesystem::path(LENGTHSMITH_DATA_DIR) / ".." / "configs" / "mock.json");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.macro_rounds, 3);
  EXPECT_EQ(c.cohort_size, 200);
  EXPECT_EQ(c.generator.kind, backend::BackendKind::mock);
  EXPECT_EQ(c.generator.mock.target_words, 1000);
  EXPECT_TRUE(c.sampler);
  ASSERT_TRUE(c.trainer_hook);
  EXPECT_EQ(c.check(), "");
  EXPECT_EQ(c.seed_instructions.filename(), "seed_instructions.jsonl");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(R"({"seed": 1, "sede": 2})"), SchemaViolation);
  EXPECT_THROW(config_from_json(R"({"filter": {"min_growth": 1.2}})"), SchemaViolation);
  EXPECT_THROW(config_from_json(R"({"backends": {"writer": {}}})"), SchemaViolation);
  EXPECT_THROW(config_from_json(R"({"seed": "seven"})"), SchemaViolation);

  lstest::TempDir dir;
  auto c = lstest::small_config(dir.path());
  EXPECT_EQ(c.check(), "");
  c.macro_rounds = 0;
  EXPECT_NE(c.check(), "");
  c = lstest::small_config(dir.path());
  c.seed_instructions = dir / "missing.jsonl";
  EXPECT_NE(c.check().find("not found"), std::string::npos);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const auto c = config_from_json(R"({"seed_instructions": "data/s.jsonl", "mixin": "/abs/m.jsonl"})",
                                  "/etc/runs");
  EXPECT_EQ(c.seed_instructions, std::filesystem::path("/etc/runs/data/s.jsonl"));
  ASSERT_TRUE(c.mixin);
  EXPECT_EQ(*c.mixin, std::filesystem::path("/abs/m.jsonl"));
}

TEST(Config, JsonRoundTripAndHash) {
  lstest::TempDir dir;
  auto c = lstest::small_config(dir.path());
  c.trainer_hook = "train --in {trainer_in}";
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 64u);

  auto d = c;
  d.parallelism = 17;
  EXPECT_EQ(config_hash(d), config_hash(c));
  d.seed = 12;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, ForceMockKeepsNames) {
  lstest::TempDir dir;
  auto c = lstest::small_config(dir.path());
  c.generator.kind = backend::BackendKind::http;
  c.generator.model = "remote-7b";
  force_mock(c);
  EXPECT_EQ(c.generator.kind, backend::BackendKind::mock);
  EXPECT_EQ(c.generator.model, "remote-7b");
}

TEST(Manifest, RoundTripAndInvariants) {
  RunManifest m;
  m.run_id = "run-1";
  m.config_hash = std::string(64, 'a');
  m.macro_iters_completed = 1;
  IterationState s;
  s.stages_completed = {"augment", "generate", "extend", "curate"};
  s.stats.n_extended = 10;
  s.stats.n_passed = 6;
  s.stats.n_sampled = 4;
  s.stats.initial = length_stats({1, 2, 3, 4});
  s.bindings.generator = lstest::mock_profile(backend::RoleTag::generator);
  s.bindings.extender = lstest::mock_profile(backend::RoleTag::extender);
  m.iterations.push_back(s);
  m.next_bindings = s.bindings;
  m.created_at = "2026-01-01T00:00:00Z";
  m.updated_at = m.created_at;
  const auto back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
  EXPECT_EQ(back.iterations[0], s);
  EXPECT_TRUE(back.iterations[0].completed(Stage::generate));
  EXPECT_FALSE(back.iterations[0].completed(Stage::build_sft));
  EXPECT_EQ(m.check(), "");
  m.iterations[0].stats.n_sampled = 7;
  EXPECT_NE(m.check(), "");
}

TEST(LengthStats, InterpolatedPercentiles) {
  const auto s = length_stats({10, 20, 30, 40, 50});
  EXPECT_EQ(s.n, 5u);
  EXPECT_DOUBLE_EQ(s.mean, 30);
  EXPECT_DOUBLE_EQ(s.median, 30);
  EXPECT_DOUBLE_EQ(s.p90, 46);
  EXPECT_EQ(length_stats({}), LengthStats{});
}

TEST(TrainerHook, RendersQuotedPlaceholders) {
  lstest::TempDir dir;
  auto req = hook_request(dir, "t {generator_sft} {extender_sft} {iter} {trainer_out}");
  req.iter = 3;
  const auto cmd = render_hook_command(req);
  EXPECT_NE(cmd.find(shell_quote(req.generator_sft.string())), std::string::npos);
  EXPECT_NE(cmd.find(" 3 "), std::string::npos);
  EXPECT_EQ(shell_quote("it's"), "'it'\\''s'");
}

TEST(TrainerHook, MockTrainerUpdatesBindings) {
  lstest::TempDir dir;
  write_sft(dir / "sft_generator.jsonl", 3000);
  write_sft(dir / "sft_extender.jsonl", 10);
  const auto b = run_trainer_hook(hook_request(dir, lstest::mock_trainer_hook()));
  EXPECT_EQ(b.generator.mock.target_words, 2000);  // halfway from 1000 toward 3000
  EXPECT_DOUBLE_EQ(b.extender.mock.extend_factor, 1.75);
  EXPECT_TRUE(std::filesystem::exists(dir / "trainer_in.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "trainer_stderr.txt"));
}

TEST(TrainerHook, HttpModelsGetRenamed) {
  lstest::TempDir dir;
  write_sft(dir / "sft_generator.jsonl", 3000);
  write_sft(dir / "sft_extender.jsonl", 10);
  auto req = hook_request(dir, lstest::mock_trainer_hook());
  req.current.generator.kind = backend::BackendKind::http;
  req.current.generator.base_url = "http://127.0.0.1:1";
  req.current.generator.model = "base-it1";
  req.iter = 1;
  const auto b = run_trainer_hook(req);
  EXPECT_EQ(b.generator.model, "base-it2");
}

TEST(TrainerHook, FailuresCarryStderr) {
  lstest::TempDir dir;
  try {
    run_trainer_hook(hook_request(dir, "echo out of memory >&2; exit 1"));
    FAIL() << "expected TrainerHookFailure";
  } catch (const TrainerHookFailure& e) {
    EXPECT_NE(e.captured_stderr().find("out of memory"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("status 1"), std::string::npos);
  }
  EXPECT_THROW(run_trainer_hook(hook_request(dir, "true")), TrainerHookFailure);
  EXPECT_THROW(run_trainer_hook(hook_request(dir, "printf '{\"generator\": 1}' > {trainer_out}")),
               SchemaViolation);
}
