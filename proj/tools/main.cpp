// lengthsmith: command-line entry points over a run directory and the
// evaluation harness. Exit codes: 0 success, 1 stage failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lengthsmith/config.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/eval.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/pipeline.hpp"
#include "lengthsmith/sftgen.hpp"

namespace fs = std::filesystem;
using namespace lengthsmith;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::string config;
  std::string run_dir;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> parallelism;
  bool mock = false;
  std::string sampler;
  std::string stop_after;
  std::optional<std::int64_t> iter;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_resume) {
  cmd->add_option("--config", f.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run-dir", f.run_dir, "run directory")->required();
  if (with_resume) cmd->add_flag("--resume", f.resume, "continue an interrupted run");
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--parallelism", f.parallelism, "maximum requests in flight")->check(CLI::PositiveNumber);
  cmd->add_flag("--mock", f.mock, "use the in-process mock for every backend");
  cmd->add_option("--sampler", f.sampler, "length-bias sampling")->check(CLI::IsMember({"on", "off"}));
}

PipelineConfig load_run_config(const RunFlags& f) {
  PipelineConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.parallelism) c.parallelism = *f.parallelism;
  if (f.mock) force_mock(c);
  if (!f.sampler.empty()) c.sampler = f.sampler == "on";
  if (auto p = c.check(); !p.empty()) throw UsageError(f.config + ": " + p);
  return c;
}

std::optional<pipeline::StopPoint> parse_stop(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--stop-after expects ITER:STAGE, got '" + s + "'");
  const auto stage = pipeline::parse_stage_name(s.substr(colon + 1));
  if (!stage) throw UsageError("unknown stage '" + s.substr(colon + 1) + "'");
  try {
    return pipeline::StopPoint{std::stoll(s.substr(0, colon)), *stage};
  } catch (const std::exception&) {
    throw UsageError("--stop-after expects ITER:STAGE, got '" + s + "'");
  }
}

void print_result(const pipeline::RunResult& r) {
  std::cout << "status: " << pipeline::to_string(r.status) << "\n"
            << "macro-iterations completed: " << r.manifest.macro_iters_completed << "\n";
  for (std::size_t k = 0; k < r.manifest.iterations.size(); ++k) {
    const auto& s = r.manifest.iterations[k].stats;
    std::cout << "iter " << k << ": instructions=" << s.n_instructions << " initial=" << s.n_initial
              << " extended=" << s.n_extended << " passed=" << s.n_passed << " sampled=" << s.n_sampled
              << " mean_initial=" << s.initial.mean << " mean_extended=" << s.extended.mean << "\n";
  }
}

int cmd_run(const RunFlags& f, bool one_iteration) {
  pipeline::Pipeline p(load_run_config(f), f.run_dir);
  pipeline::RunOptions opts;
  opts.resume = f.resume;
  opts.stop_after = parse_stop(f.stop_after);
  print_result(one_iteration ? p.iterate(opts) : p.run(opts));
  return 0;
}

int cmd_stage(const RunFlags& f, Stage stage) {
  pipeline::Pipeline p(load_run_config(f), f.run_dir);
  const auto next = p.next_stage();
  if (!next) throw UsageError("every macro-iteration of this run is complete");
  if (next->stage != stage || (f.iter && *f.iter != next->iter)) {
    throw UsageError("the next stage of this run is " + std::string(to_string(next->stage)) +
                     " of iteration " + std::to_string(next->iter));
  }
  p.run_stage(next->iter, stage);
  std::cout << to_string(stage) << " of iteration " << next->iter << " complete\n";
  return 0;
}

// Judge or seed model for the standalone commands: from --config, or the
// default mock with --mock.
backend::BackendPtr standalone_backend(const std::string& config, bool mock, backend::RoleTag role) {
  backend::BackendProfile profile = backend::default_profile(role);
  profile.name = std::string(to_string(role));
  profile.model = "mock-" + profile.name;
  if (!config.empty()) {
    const auto c = load_config(config);
    profile = role == backend::RoleTag::judge ? c.judge : c.seed_model;
  } else if (!mock) {
    throw UsageError("pass --config for the backend profile, or --mock");
  }
  if (mock) profile.kind = backend::BackendKind::mock;
  if (auto p = profile.check(); !p.empty()) throw UsageError("backend '" + profile.name + "': " + p);
  return backend::make_backend(profile);
}

prompts::PromptSet standalone_prompts(const std::string& config) {
  if (config.empty()) return prompts::PromptSet::defaults();
  const auto c = load_config(config);
  return c.prompt_dir ? prompts::PromptSet::from_directory(*c.prompt_dir) : prompts::PromptSet::defaults();
}

void write_out(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, content);
  std::cerr << "wrote " << path.string() << "\n";
}

struct EvalFlags {
  std::string manifest;
  std::vector<std::string> outputs;
  std::string out_dir = ".";
  std::string config;
  bool mock = false;
  std::int64_t parallelism = 8;
};

int cmd_eval(const EvalFlags& f, bool quality) {
  if (f.outputs.size() != 1) throw UsageError("pass exactly one --outputs file");
  auto bench = eval::load_benchmark(f.manifest);
  eval::score_lengths(bench.items, eval::load_outputs(f.outputs.front()));
  if (quality) {
    auto judge = standalone_backend(f.config, f.mock, backend::RoleTag::judge);
    const auto prompts = standalone_prompts(f.config);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < bench.items.size(); ++i) {
      if (!bench.items[i].response_text) continue;
      pairs.emplace_back(bench.items[i].prompt.text, *bench.items[i].response_text);
      which.push_back(i);
    }
    const auto scores = eval::quality_batch(pairs, *judge, prompts, static_cast<std::size_t>(f.parallelism));
    for (std::size_t k = 0; k < scores.size(); ++k) {
      auto& item = bench.items[which[k]];
      if (scores[k].result) {
        item.s_q = scores[k].result->s_q;
        item.aspect_scores = scores[k].result->aspects;
      } else {
        spdlog::warn("no quality score for '{}': {}", item.id, scores[k].error);
      }
    }
  }
  const auto summary = eval::summarize(bench.items);
  const std::string json = eval::summary_json(summary);
  write_out(fs::path(f.out_dir) / "results.jsonl", eval::results_jsonl(bench.items));
  write_out(fs::path(f.out_dir) / "summary.json", json);
  std::cout << json;
  return 0;
}

int cmd_winrate(const EvalFlags& f) {
  if (f.outputs.size() < 2) throw UsageError("pass at least two --outputs NAME=PATH files");
  const auto bench = eval::load_benchmark(f.manifest);
  std::vector<std::string> names;
  std::vector<std::map<std::string, std::string>> outs;
  for (const auto& spec : f.outputs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--outputs expects NAME=PATH, got '" + spec + "'");
    names.push_back(spec.substr(0, eq));
    outs.push_back(eval::load_outputs(spec.substr(eq + 1)));
  }
  auto judge = standalone_backend(f.config, f.mock, backend::RoleTag::judge);
  const auto prompts = standalone_prompts(f.config);

  const std::size_t m = names.size();
  std::vector<std::vector<std::optional<double>>> matrix(m, std::vector<std::optional<double>>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      std::vector<std::string> instr, a, b;
      for (const auto& item : bench.items) {
        const auto ia = outs[i].find(item.id);
        const auto ib = outs[j].find(item.id);
        if (ia == outs[i].end() || ib == outs[j].end()) continue;
        instr.push_back(item.prompt.text);
        a.push_back(ia->second);
        b.push_back(ib->second);
      }
      const auto w = eval::win_rate(instr, a, b, *judge, prompts, static_cast<std::size_t>(f.parallelism));
      matrix[i][j] = w.rate;
      matrix[j][i] = 1.0 - w.rate;
      std::cout << names[i] << " vs " << names[j] << ": " << w.rate << " (" << w.wins << "W/" << w.losses
                << "L/" << w.ties << "T, " << w.failed << " failed)\n";
    }
  }
  write_out(fs::path(f.out_dir) / "winrate.csv", eval::winrate_csv(names, matrix));
  return 0;
}

struct RephraseFlags {
  std::string input;
  std::string output;
  std::int64_t target = 0;
  std::string kind = "round-robin";
  bool benchmark = false;
  std::string config;
  bool mock = false;
  std::int64_t parallelism = 8;
};

std::string bucket_for(std::int64_t target) {
  if (target >= 2000 && target < 4000) return "2k-4k";
  if (target >= 4000 && target < 6000) return "4k-6k";
  if (target >= 6000 && target <= 8000) return "6k-8k";
  throw UsageError("--benchmark needs a target between 2000 and 8000 words");
}

int cmd_rephrase(const RephraseFlags& f) {
  const auto instructions = read_jsonl<Instruction>(f.input);
  auto seed_model = standalone_backend(f.config, f.mock, backend::RoleTag::seed);
  const auto prompts = standalone_prompts(f.config);
  const std::string bucket = f.benchmark ? bucket_for(f.target) : "";

  std::vector<sftgen::RephraseJob> jobs;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    ConstraintKind kind = kAllConstraintKinds[i % 4];
    if (f.kind != "round-robin") kind = *parse_constraint_kind(f.kind);
    jobs.push_back({instructions[i], f.target, kind});
  }
  const auto res = sftgen::rephrase_batch(jobs, *seed_model, prompts, static_cast<std::size_t>(f.parallelism));
  std::string content;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (!res[i].instruction) {
      ++failed;
      spdlog::warn("could not rephrase '{}': {}", jobs[i].instruction.id, res[i].error);
      continue;
    }
    const auto& r = *res[i].instruction;
    if (f.benchmark) {
      eval::EvalItem item;
      item.id = r.id;
      item.prompt = r;
      item.language = r.language;
      item.bucket = *eval::parse_length_bucket(bucket);
      content += eval::benchmark_line(item) + "\n";
    } else {
      content += to_jsonl(r) + "\n";
    }
  }
  write_out(f.output, content);
  std::cout << res.size() - failed << " rephrased, " << failed << " failed\n";
  return failed == 0 ? 0 : kExitStage;
}

int cmd_report(const std::string& run_dir, std::string out_dir, std::int64_t bin_width) {
  if (out_dir.empty()) out_dir = run_dir;
  const auto rep = pipeline::build_report(RunDir(run_dir), bin_width);
  write_out(fs::path(out_dir) / "lengths.csv", rep.lengths_csv);
  write_out(fs::path(out_dir) / "histogram.csv", rep.histogram_csv);
  write_out(fs::path(out_dir) / "summary.json", rep.summary_json);
  std::cout << rep.summary_json;
  return 0;
}

// Trainer hooks run through /bin/sh; let them find tools installed next to this binary.
void prepend_own_dir_to_path() {
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (ec) return;
  const char* old = std::getenv("PATH");
  std::string path = self.parent_path().string();
  if (old && *old) path += std::string(":") + old;
  ::setenv("PATH", path.c_str(), 1);
}

}  // namespace

int main(int argc, char** argv) {
  prepend_own_dir_to_path();
  spdlog::set_default_logger(spdlog::stderr_color_mt("lengthsmith"));

  CLI::App app{"lengthsmith: iterative synthesis of long-form training data, plus evaluation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run every macro-iteration and final-alignment collection");
  add_run_flags(run, run_flags, true);
  run->add_option("--stop-after", run_flags.stop_after, "stop after ITER:STAGE, as if killed");
  auto* iterate = app.add_subcommand("iterate", "run the next macro-iteration");
  add_run_flags(iterate, run_flags, false);

  const std::pair<const char*, Stage> stage_cmds[] = {{"augment", Stage::augment},
                                                      {"generate", Stage::generate},
                                                      {"extend", Stage::extend},
                                                      {"curate", Stage::curate},
                                                      {"build-sft", Stage::build_sft}};
  std::vector<std::pair<CLI::App*, Stage>> stage_apps;
  for (const auto& [name, stage] : stage_cmds) {
    auto* cmd = app.add_subcommand(name, "run the " + std::string(name) + " stage of the next iteration");
    add_run_flags(cmd, run_flags, false);
    cmd->add_option("--iter", run_flags.iter, "fail unless the next iteration is this one");
    stage_apps.emplace_back(cmd, stage);
  }

  RephraseFlags rf;
  auto* rephrase = app.add_subcommand("rephrase", "add length constraints to instructions with the seed model");
  rephrase->add_option("--input", rf.input, "instructions JSONL")->required()->check(CLI::ExistingFile);
  rephrase->add_option("--output", rf.output, "output JSONL")->required();
  rephrase->add_option("--target", rf.target, "target length in words")->required()->check(CLI::PositiveNumber);
  rephrase->add_option("--kind", rf.kind, "constraint kind")
      ->check(CLI::IsMember({"about", "range", "above", "below", "round-robin"}));
  rephrase->add_flag("--benchmark", rf.benchmark, "emit benchmark manifest lines instead of instructions");
  rephrase->add_option("--config", rf.config, "config holding the seed backend")->check(CLI::ExistingFile);
  rephrase->add_flag("--mock", rf.mock, "use the mock seed model");
  rephrase->add_option("--parallelism", rf.parallelism)->check(CLI::PositiveNumber);

  EvalFlags ef;
  auto add_eval = [&](const char* name, const char* help, bool judged) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--manifest", ef.manifest, "benchmark manifest JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--outputs", ef.outputs, judged ? "outputs JSONL (NAME=PATH for win-rates)" : "outputs JSONL")
        ->required();
    cmd->add_option("--out-dir", ef.out_dir, "directory for results");
    if (judged) {
      cmd->add_option("--config", ef.config, "config holding the judge backend")->check(CLI::ExistingFile);
      cmd->add_flag("--mock", ef.mock, "use the mock judge");
      cmd->add_option("--parallelism", ef.parallelism)->check(CLI::PositiveNumber);
    }
    return cmd;
  };
  auto* eval_length = add_eval("eval-length", "length-following score of model outputs", false);
  auto* eval_quality = add_eval("eval-quality", "length and judged quality scores", true);
  auto* eval_winrate = add_eval("eval-winrate", "position-swapped pairwise win-rates", true);

  std::string report_dir, report_out;
  std::int64_t bin_width = 500;
  auto* report = app.add_subcommand("report", "length percentiles and histograms per iteration");
  report->add_option("--run-dir", report_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out-dir", report_out, "defaults to the run directory");
  report->add_option("--bin-width", bin_width, "histogram bin width in words")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (run->parsed()) return cmd_run(run_flags, false);
    if (iterate->parsed()) return cmd_run(run_flags, true);
    for (const auto& [cmd, stage] : stage_apps) {
      if (cmd->parsed()) return cmd_stage(run_flags, stage);
    }
    if (rephrase->parsed()) return cmd_rephrase(rf);
    if (eval_length->parsed()) return cmd_eval(ef, false);
    if (eval_quality->parsed()) return cmd_eval(ef, true);
    if (eval_winrate->parsed()) return cmd_winrate(ef);
    if (report->parsed()) return cmd_report(report_dir, report_out, bin_width);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainerHookFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.captured_stderr().empty()) std::cerr << "trainer stderr:\n" << e.captured_stderr();
    return kExitStage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Config ? kExitUsage : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitUsage;
}
