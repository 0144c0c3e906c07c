#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/records.hpp"

// On-disk layout of a run and its manifest:
//
//   <run>/manifest.json, config.json, sft_final.jsonl
//   <run>/iter-<k>/{instructions,initial,extended,filtered,rejects,
//                   sft_generator,sft_extender}.jsonl
//   <run>/iter-<k>/traces/extension_traces.jsonl
//   <run>/iter-<k>/trainer_{in,out}.json, trainer_stderr.txt
namespace lengthsmith {

enum class Stage { augment, generate, extend, curate, build_sft, train };
inline constexpr Stage kAllStages[] = {Stage::augment, Stage::generate,  Stage::extend,
                                       Stage::curate,  Stage::build_sft, Stage::train};
std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

struct LengthStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;

  bool operator==(const LengthStats&) const = default;
};

// Percentiles interpolate linearly between order statistics; all zero when empty.
LengthStats length_stats(std::vector<std::int64_t> lengths);
double percentile(const std::vector<std::int64_t>& sorted, double q);

struct IterationStats {
  std::size_t n_instructions = 0;
  std::size_t n_new_instructions = 0;
  std::size_t n_initial = 0;
  std::size_t n_extended = 0;
  std::size_t n_passed = 0;
  std::size_t n_sampled = 0;
  std::size_t n_generator_sft = 0;
  std::size_t n_extender_sft = 0;
  LengthStats initial;
  LengthStats extended;

  bool operator==(const IterationStats&) const = default;
};

struct Bindings {
  backend::BackendProfile generator;
  backend::BackendProfile extender;

  bool operator==(const Bindings&) const = default;
};

struct IterationState {
  std::vector<std::string> stages_completed;
  IterationStats stats;
  Bindings bindings;  // the models this iteration ran with

  bool completed(Stage s) const;
  bool operator==(const IterationState&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string config_hash;
  std::int64_t macro_iters_completed = 0;
  std::vector<IterationState> iterations;
  // Models produced by the trainer after the last completed iteration.
  std::optional<Bindings> next_bindings;
  bool dataset_only = false;
  bool final_alignment_done = false;
  std::string created_at;  // timestamps live only here
  std::string updated_at;

  // Empty when the stats respect n_sampled <= n_passed <= n_extended.
  std::string check() const;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text);

class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest() const { return root_ / "manifest.json"; }
  std::filesystem::path config() const { return root_ / "config.json"; }
  std::filesystem::path sft_final() const { return root_ / "sft_final.jsonl"; }
  std::filesystem::path iter_dir(std::int64_t k) const;
  std::filesystem::path file(std::int64_t k, std::string_view name) const { return iter_dir(k) / name; }
  std::filesystem::path traces(std::int64_t k) const;

  bool has_manifest() const { return std::filesystem::exists(manifest()); }
  RunManifest load_manifest() const;
  // Stamps updated_at and writes atomically.
  void save_manifest(RunManifest& m) const;

 private:
  std::filesystem::path root_;
};

std::string utc_timestamp();

}  // namespace lengthsmith
