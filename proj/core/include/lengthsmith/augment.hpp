#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/prompts.hpp"
#include "lengthsmith/records.hpp"

// Instruction-pool bootstrapping: 2-shot self-instruct plus a yes/no
// suitability check for long-form answers.
namespace lengthsmith::augment {

struct DedupConfig {
  double jaccard_threshold = 0.7;
};

// Lowercased tokens with surrounding punctuation stripped.
std::vector<std::string> normalized_tokens(std::string_view text);
std::string normalize_text(std::string_view text);
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);
bool is_near_duplicate(std::string_view candidate, std::string_view existing,
                       const DedupConfig& cfg = {});

// Extracts one instruction from a self-instruct completion: the first nonempty
// line, with an echoed "Instruction N:" label removed. Empty when nothing usable.
std::string parse_instruction_completion(std::string_view completion);

enum class Verdict { yes, no, unparseable };
Verdict parse_yes_no(std::string_view completion);

struct RoundOptions {
  std::size_t n_new = 1;
  std::uint64_t rng_seed = 0;
  std::int64_t macro_iter = 0;
  std::size_t parallelism = 1;
  std::string id_prefix = "si";
  DedupConfig dedup;
};

// Samples two distinct exemplars per request, renders the self-instruct
// template, and returns the parsed, deduplicated new instructions (at most
// n_new). Backend failures are logged and skipped. Throws PoolTooSmall when the
// pool has fewer than two instructions.
std::vector<Instruction> self_instruct_round(const std::vector<Instruction>& pool,
                                             backend::ChatBackend& backend,
                                             const prompts::PromptSet& prompts,
                                             const RoundOptions& opts);

// Fail-closed: an unparseable judge reply counts as unsuitable. Backend errors
// propagate.
bool validate_instruction(const Instruction& instr, backend::ChatBackend& judge,
                          const prompts::PromptSet& prompts);

// Batched validation; entries whose judge call failed are treated as false.
std::vector<bool> validate_instructions(const std::vector<Instruction>& instrs,
                                        backend::ChatBackend& judge,
                                        const prompts::PromptSet& prompts,
                                        std::size_t parallelism);

backend::ChatRequest validation_request(const Instruction& instr,
                                        const backend::BackendProfile& judge,
                                        const prompts::PromptSet& prompts);

}  // namespace lengthsmith::augment
