#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/curate.hpp"

namespace lengthsmith {

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::int64_t macro_rounds = 3;
  std::int64_t micro_rounds = 3;
  std::int64_t parallelism = 8;
  // Instructions answered per macro-iteration. Arbitrary; nothing upstream fixes it.
  std::int64_t cohort_size = 1000;
  // Each augmentation round asks for ceil(pool * (pool_growth - 1)) new
  // instructions, capped at max_new_per_iter.
  double pool_growth = 1.5;
  std::int64_t max_new_per_iter = 1000;
  double dedup_threshold = 0.7;

  backend::BackendProfile generator = backend::default_profile(backend::RoleTag::generator);
  backend::BackendProfile extender = backend::default_profile(backend::RoleTag::extender);
  backend::BackendProfile seed_model = backend::default_profile(backend::RoleTag::seed);
  backend::BackendProfile judge = backend::default_profile(backend::RoleTag::judge);

  std::filesystem::path seed_instructions;  // JSONL of instructions
  std::optional<std::filesystem::path> prompt_dir;
  std::optional<std::filesystem::path> mixin;  // SFT lines appended verbatim to sft_final.jsonl

  curate::FilterConfig filter;
  bool sampler = true;
  bool final_alignment = true;
  // Shell command with {generator_sft} {extender_sft} {iter} {trainer_in}
  // {trainer_out} placeholders. Absent: dataset-only mode.
  std::optional<std::string> trainer_hook;

  // Empty when valid. Checks referenced files exist.
  std::string check() const;
};

// Unknown keys are rejected; missing keys keep their defaults. Relative paths
// resolve against `base_dir`.
PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& c);

// SHA-256 (hex) of the canonical JSON, leaving out settings that cannot change
// outputs (parallelism).
std::string config_hash(const PipelineConfig& c);

// Rewrites every profile to the in-process mock, keeping names and models.
void force_mock(PipelineConfig& c);

}  // namespace lengthsmith
