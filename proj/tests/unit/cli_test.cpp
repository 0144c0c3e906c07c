// Drives the built command-line tool through /bin/sh.

#include <sys/wait.h>

#include <gtest/gtest.h>

#include <cstdlib>

#include "lengthsmith/config.hpp"
#include "lengthsmith/eval.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/trainer_hook.hpp"
#include "support.hpp"
#include "json.hpp"

using namespace lengthsmith;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const lstest::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const std::string cmd = shell_quote(LENGTHSMITH_CLI) + " " + args + " >" + shell_quote(out.string()) +
                          " 2>" + shell_quote((dir / "stderr.txt").string());
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  return r;
}

std::filesystem::path write_config(const lstest::TempDir& dir, bool hook) {
  auto c = lstest::small_config(dir.path());
  if (hook) c.trainer_hook = lstest::mock_trainer_hook();
  const auto path = dir / "config.json";
  write_file_atomic(path, config_to_json(c));
  return path;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  lstest::TempDir dir;
  EXPECT_EQ(cli(dir, "--help").code, 0);
  EXPECT_EQ(cli(dir, "").code, 2);
  EXPECT_EQ(cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(cli(dir, "run --config /nonexistent.json --run-dir x").code, 2);
  const auto cfg = write_config(dir, true);
  EXPECT_EQ(cli(dir, "run --config " + cfg.string() + " --run-dir r --stop-after nonsense").code, 2);
  EXPECT_EQ(cli(dir, "run --config " + cfg.string() + " --run-dir r --sampler maybe").code, 2);
}

TEST(Cli, RunStopResumeAndReport) {
  lstest::TempDir dir;
  const auto cfg = shell_quote(write_config(dir, true).string());
  const auto run = shell_quote((dir / "run").string());
  auto r = cli(dir, "-q run --config " + cfg + " --run-dir " + run + " --stop-after 0:curate");
  ASSERT_EQ(r.code, 0) << read_file(dir / "stderr.txt");
  EXPECT_NE(r.out.find("status: stopped"), std::string::npos);

  // The next stage is build-sft, so asking for extend is a usage error.
  EXPECT_EQ(cli(dir, "-q extend --config " + cfg + " --run-dir " + run).code, 2);
  r = cli(dir, "-q build-sft --config " + cfg + " --run-dir " + run);
  EXPECT_EQ(r.code, 0) << read_file(dir / "stderr.txt");

  // Resuming without --resume is refused.
  EXPECT_EQ(cli(dir, "-q run --config " + cfg + " --run-dir " + run).code, 2);
  r = cli(dir, "-q run --config " + cfg + " --run-dir " + run + " --resume");
  ASSERT_EQ(r.code, 0) << read_file(dir / "stderr.txt");
  EXPECT_NE(r.out.find("status: completed"), std::string::npos);
  EXPECT_NE(r.out.find("macro-iterations completed: 2"), std::string::npos);

  r = cli(dir, "report --run-dir " + run + " --out-dir " + shell_quote((dir / "rep").string()));
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "lengths.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "histogram.csv"));
}

TEST(Cli, FailingHookExitsNonzero) {
  lstest::TempDir dir;
  auto c = lstest::small_config(dir.path());
  c.trainer_hook = "echo disk full >&2; exit 4";
  write_file_atomic(dir / "config.json", config_to_json(c));
  const auto r = cli(dir, "-q run --config " + shell_quote((dir / "config.json").string()) + " --run-dir " +
                              shell_quote((dir / "run").string()));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(read_file(dir / "stderr.txt").find("disk full"), std::string::npos);
}

TEST(Cli, RephraseAndEvaluate) {
  lstest::TempDir dir;
  std::vector<Instruction> instrs;
  for (int i = 0; i < 8; ++i) {
    instrs.push_back(lstest::instruction("q" + std::to_string(i), "Write a detailed history of city " +
                                                                       std::to_string(i) + "."));
  }
  write_jsonl(dir / "instr.jsonl", instrs);
  const auto bench = dir / "bench.jsonl";
  auto r = cli(dir, "rephrase --mock --benchmark --target 3000 --input " + shell_quote((dir / "instr.jsonl").string()) +
                        " --output " + shell_quote(bench.string()));
  ASSERT_EQ(r.code, 0) << read_file(dir / "stderr.txt");
  const auto b = eval::load_benchmark(bench);
  ASSERT_EQ(b.items.size(), 8u);

  std::string short_out, long_out;
  for (const auto& it : b.items) {
    short_out += nlohmann::json{{"id", it.id}, {"response", backend::mock_generate(1, 500)}}.dump() + "\n";
    long_out += nlohmann::json{{"id", it.id}, {"response", backend::mock_generate(2, 3000)}}.dump() + "\n";
  }
  write_file_atomic(dir / "short.jsonl", short_out);
  write_file_atomic(dir / "long.jsonl", long_out);

  const auto out_dir = shell_quote((dir / "res").string());
  r = cli(dir, "-q eval-quality --mock --manifest " + shell_quote(bench.string()) + " --outputs " +
                   shell_quote((dir / "long.jsonl").string()) + " --out-dir " + out_dir);
  ASSERT_EQ(r.code, 0) << read_file(dir / "stderr.txt");
  EXPECT_TRUE(std::filesystem::exists(dir / "res" / "results.jsonl"));
  EXPECT_NE(read_file(dir / "res" / "summary.json").find("\"overall\""), std::string::npos);

  r = cli(dir, "-q eval-winrate --mock --manifest " + shell_quote(bench.string()) + " --outputs long=" +
                   shell_quote((dir / "long.jsonl").string()) + " short=" + shell_quote((dir / "short.jsonl").string()) +
                   " --out-dir " + out_dir);
  ASSERT_EQ(r.code, 0) << read_file(dir / "stderr.txt");
  EXPECT_EQ(read_file(dir / "res" / "winrate.csv"), "model,long,short\nlong,,1.000000\nshort,0.000000,\n");

  EXPECT_EQ(cli(dir, "eval-winrate --mock --manifest " + shell_quote(bench.string()) + " --outputs x").code, 2);
}
