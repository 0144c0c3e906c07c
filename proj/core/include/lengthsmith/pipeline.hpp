#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/config.hpp"
#include "lengthsmith/prompts.hpp"
#include "lengthsmith/run_dir.hpp"

// Macro-iteration orchestration over a run directory. Every stage reads its
// inputs from the files of earlier stages and writes its own files before the
// manifest marks it complete, so a rerun with resume picks up after the last
// completed stage.
namespace lengthsmith::pipeline {

using BackendFactory = std::function<backend::BackendPtr(const backend::BackendProfile&)>;

struct StopPoint {
  std::int64_t iter = 0;
  Stage stage = Stage::augment;
};

struct RunOptions {
  bool resume = false;
  // Return right after this stage completes, as if the process had been killed.
  std::optional<StopPoint> stop_after;
};

enum class RunStatus { completed, stopped, dataset_only };
std::string_view to_string(RunStatus s);

struct RunResult {
  RunStatus status = RunStatus::completed;
  RunManifest manifest;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path run_dir,
           BackendFactory factory = backend::make_backend);

  // All macro-iterations, then final-alignment collection.
  RunResult run(const RunOptions& opts = {});

  // Completes the next unfinished macro-iteration (creating the run if needed).
  RunResult iterate(const RunOptions& opts = {});

  // Runs one stage. Earlier stages of the iteration, and all earlier
  // iterations, must be complete; completed stages are never rerun.
  void run_stage(std::int64_t iter, Stage stage);

  // The next stage to run, or nullopt when every iteration is done.
  std::optional<StopPoint> next_stage();

  void final_alignment();

  const RunDir& dir() const { return dir_; }
  const PipelineConfig& config() const { return config_; }
  const RunManifest& manifest() const { return manifest_; }

 private:
  void open(bool resume);
  Bindings bindings_for(std::int64_t iter) const;
  void execute(std::int64_t iter, Stage stage);
  void mark(std::int64_t iter, Stage stage);

  void stage_augment(std::int64_t k);
  void stage_generate(std::int64_t k);
  void stage_extend(std::int64_t k);
  void stage_curate(std::int64_t k);
  void stage_build_sft(std::int64_t k);
  void stage_train(std::int64_t k);

  PipelineConfig config_;
  RunDir dir_;
  BackendFactory factory_;
  prompts::PromptSet prompts_;
  RunManifest manifest_;
  bool opened_ = false;
};

// Accepts both "build-sft" and "build_sft".
std::optional<Stage> parse_stage_name(std::string_view s);

// Per-iteration length distributions of a run: lengths.csv has one row per
// (iter, role, percentile) and histogram.csv one row per (iter, role, bin).
struct Report {
  std::string lengths_csv;
  std::string histogram_csv;
  std::string summary_json;
};

Report build_report(const RunDir& dir, std::int64_t bin_width = 500);

}  // namespace lengthsmith::pipeline
