#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/prompts.hpp"
#include "lengthsmith/records.hpp"

// Two-stage response extension and the micro-iteration loop.
//
// Stage 1 enriches the first half of a response. The first two-thirds of that
// enrichment become a demonstration; stage 2 sees the whole original plus the
// demonstration and writes a continuation. The result is the demonstration
// followed by the continuation, so the opening is never re-generated.
namespace lengthsmith::extend {

struct ExtensionTrace {
  std::string input_response_id;
  std::int64_t round = 1;
  std::string stage1_input;
  std::string stage1_output;
  std::string demonstration;
  std::string stage2_output;  // exactly the text appended after the demonstration
  std::string final_text;
  bool accepted = false;
  std::string note;  // why a trace was rejected, if it was

  bool operator==(const ExtensionTrace&) const = default;
};

// Empty when the trace is internally consistent.
std::string check_invariants(const ExtensionTrace& t, std::size_t input_words);

// demonstration followed by the continuation separated by exactly one blank
// line; a blank continuation leaves the demonstration alone.
std::string seam_continuation(std::string_view completion);

backend::ChatRequest stage1_request(const Instruction& instr, const std::string& first_half,
                                    const backend::BackendProfile& profile,
                                    const prompts::PromptSet& prompts);
backend::ChatRequest stage2_request(const Instruction& instr, const std::string& full_response,
                                    const std::string& demonstration,
                                    const backend::BackendProfile& profile,
                                    const prompts::PromptSet& prompts);

ExtensionTrace extend_once(const Instruction& instr, const ResponseRecord& response,
                           backend::ChatBackend& extender, const prompts::PromptSet& prompts);

struct MicroResult {
  // The longest accepted extension (role=extended, parent = the input), or the
  // unchanged input when the first round was rejected.
  ResponseRecord record;
  bool extended = false;
  std::vector<ExtensionTrace> traces;
};

// Runs up to `rounds` extensions, each fed the previous accepted output; the
// first rejected round ends the loop. `rounds` must be >= 1.
MicroResult micro_iterate(const Instruction& instr, const ResponseRecord& response,
                          backend::ChatBackend& extender, const prompts::PromptSet& prompts,
                          int rounds = 3);

struct CohortItem {
  const Instruction* instruction;
  ResponseRecord response;
};

// micro_iterate over many responses in lockstep so that each stage of each
// round is one bounded-parallel batch. Equivalent to calling micro_iterate
// per item with a deterministic backend.
std::vector<MicroResult> extend_cohort(const std::vector<CohortItem>& items,
                                       backend::ChatBackend& extender,
                                       const prompts::PromptSet& prompts, int rounds,
                                       std::size_t parallelism);

}  // namespace lengthsmith::extend

namespace lengthsmith {

template <>
struct JsonlCodec<extend::ExtensionTrace> {
  static std::string encode(const extend::ExtensionTrace& v);
  static extend::ExtensionTrace decode(std::string_view line);
};

}  // namespace lengthsmith
