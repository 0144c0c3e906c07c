#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/prompts.hpp"
#include "lengthsmith/records.hpp"

// Fine-tuning datasets in chat-messages form: Generator pairs, Extender
// triplets, and length-constrained final-alignment data.
namespace lengthsmith::sftgen {

enum class SftKind { generator, extender, final_alignment };
std::string_view to_string(SftKind k);  // "generator", "extender", "final"
std::optional<SftKind> parse_sft_kind(std::string_view s);

struct SftMeta {
  std::int64_t macro_iter = 0;
  std::string instruction_id;
  std::string response_id;
  std::int64_t target_length_words = 0;
  std::optional<LengthConstraint> constraint;

  bool operator==(const SftMeta&) const = default;
};

struct SftExample {
  SftKind kind = SftKind::generator;
  std::vector<backend::ChatMessage> messages;  // one user turn, one assistant turn
  SftMeta meta;

  bool operator==(const SftExample&) const = default;
};

std::string check_invariants(const SftExample& e);

// One (x, y+) example per kept record, assistant turn verbatim.
// Throws MissingInstruction for a dangling instruction_id.
std::vector<SftExample> build_generator_set(const std::vector<ResponseRecord>& kept,
                                            const std::vector<Instruction>& instructions,
                                            std::int64_t macro_iter);

// Removes max(1, floor(fraction * n)) of the n nonblank lines, chosen uniformly
// without replacement; survivors keep their order and are joined by single
// newlines. Fewer than two lines leaves the text unchanged.
std::string drop_lines(std::string_view y, double fraction, std::uint64_t seed);

// Number of lines drop_lines removes from n lines.
std::size_t lines_to_drop(std::size_t n, double fraction);

// One (x, y-, y+) example per kept record: the user turn is the extension
// template over the instruction and a line-dropped copy of the parent.
std::vector<SftExample> build_extender_set(const std::vector<ResponseRecord>& kept,
                                           const std::vector<ResponseRecord>& parents,
                                           const std::vector<Instruction>& instructions,
                                           const prompts::PromptSet& prompts,
                                           std::uint64_t seed, std::int64_t macro_iter);

// Builds a constraint of `kind` that `target_words` satisfies, with numbers
// rounded to the nearest hundred when rounding keeps the target inside the
// evaluation bounds, unrounded otherwise. Requires target_words > 0.
LengthConstraint constraint_for_target(std::int64_t target_words, ConstraintKind kind);

// Natural-language rendering, e.g. "between 3800 and 4600 words".
std::string constraint_phrase(const LengthConstraint& c, Language lang);

// True when the text mentions every number of the constraint, either as plain
// digits or comma-grouped.
bool mentions_constraint(std::string_view text, const LengthConstraint& c);

struct RephraseJob {
  Instruction instruction;
  std::int64_t target_words = 0;
  ConstraintKind kind = ConstraintKind::about;
};

struct RephraseOutcome {
  std::optional<Instruction> instruction;
  std::string error;
};

// Up to three attempts per job; a job whose replies never mention the
// numbers ends with ConstraintNotEmbedded in `error`.
std::vector<RephraseOutcome> rephrase_batch(const std::vector<RephraseJob>& jobs,
                                            backend::ChatBackend& seed_model,
                                            const prompts::PromptSet& prompts,
                                            std::size_t parallelism);

// Single-job form; throws ConstraintNotEmbedded or BackendError.
Instruction rephrase_with_length(const Instruction& instr, std::int64_t target_words,
                                 ConstraintKind kind, backend::ChatBackend& seed_model,
                                 const prompts::PromptSet& prompts);

struct IterationData {
  std::int64_t macro_iter = 0;
  std::vector<Instruction> instructions;
  std::vector<ResponseRecord> initial;
  std::vector<ResponseRecord> filtered;
};

// Pools initial and filtered responses of every iteration (first occurrence
// of a response id wins), assigns constraint kinds round-robin, rephrases the
// instructions, and emits final-kind examples. Responses whose rephrasing
// failed are skipped with a warning. Throws Error(EmptyRun) when no iteration
// contributes a response.
std::vector<SftExample> collect_final_alignment(const std::vector<IterationData>& iterations,
                                                backend::ChatBackend& seed_model,
                                                const prompts::PromptSet& prompts,
                                                std::size_t parallelism);

}  // namespace lengthsmith::sftgen

namespace lengthsmith {

template <>
struct JsonlCodec<sftgen::SftExample> {
  static std::string encode(const sftgen::SftExample& v);
  static sftgen::SftExample decode(std::string_view line);
};

}  // namespace lengthsmith
