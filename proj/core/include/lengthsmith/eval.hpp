#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/prompts.hpp"
#include "lengthsmith/records.hpp"

// Length-following, judged quality, diversity and pairwise win-rate metrics
// over a length-constrained benchmark.
namespace lengthsmith::eval {

enum class LengthBucket { b2_4k, b4_6k, b6_8k };
std::string_view to_string(LengthBucket b);  // "2k-4k", "4k-6k", "6k-8k"
std::optional<LengthBucket> parse_length_bucket(std::string_view s);

inline constexpr std::array<std::string_view, 7> kAspects = {
    "relevance", "coherence", "accuracy", "consistency", "clarity", "creativity", "engagement"};

// Bounds in tenths of a word, so every kind's bounds are integers.
struct TargetBounds {
  std::int64_t min_tenths = 0;
  std::int64_t max_tenths = 0;

  double min_words() const { return static_cast<double>(min_tenths) / 10.0; }
  double max_words() const { return static_cast<double>(max_tenths) / 10.0; }
};

// about x -> (0.8x, 1.2x); range -> (x1, x2); above x -> (x, 1.5x);
// below x -> (0.5x, x). Throws std::invalid_argument on an invalid constraint.
TargetBounds target_bounds(const LengthConstraint& c);

// 1 inside the bounds, 2y/min - 1 below, 3 - 2y/max above, clamped at 0.
double length_score(std::int64_t y_words, const LengthConstraint& c);

struct QualityResult {
  double s_q = 0.0;                         // mean of the rescaled aspects, 10..100
  std::map<std::string, double> aspects;    // each judge score x10
};

// Parses a judge reply holding a JSON object with exactly the seven aspect
// keys, each an integer in [1, 10]. Returns nullopt when the reply is unusable.
std::optional<QualityResult> parse_quality_reply(std::string_view reply);

backend::ChatRequest quality_request(std::string_view instruction, std::string_view response,
                                     const backend::BackendProfile& judge,
                                     const prompts::PromptSet& prompts);

// Judge at temperature 0, up to three attempts; throws JudgeParseFailure.
QualityResult quality_score(std::string_view instruction, std::string_view response,
                            backend::ChatBackend& judge, const prompts::PromptSet& prompts);

struct QualityOutcome {
  std::optional<QualityResult> result;
  std::string error;
};

std::vector<QualityOutcome> quality_batch(
    const std::vector<std::pair<std::string, std::string>>& instruction_response,
    backend::ChatBackend& judge, const prompts::PromptSet& prompts, std::size_t parallelism);

// Mean over texts of unique/total word n-grams; a text with fewer than n
// words scores 1. Requires n >= 1 and a nonempty list.
double distinct_n(const std::vector<std::string>& texts, std::size_t n);

enum class PairVerdict { first, second, tie };
std::optional<PairVerdict> parse_pairwise_reply(std::string_view reply);

struct WinRate {
  double rate = 0.0;  // (wins + ties/2) / valid comparisons; 0.5 when none are valid
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  std::size_t valid = 0;
  std::size_t failed = 0;  // judge errors or unparseable replies, excluded
};

// Judges each aligned (a, b) pair twice, once per order, from A's viewpoint.
WinRate win_rate(const std::vector<std::string>& instructions, const std::vector<std::string>& a,
                 const std::vector<std::string>& b, backend::ChatBackend& judge,
                 const prompts::PromptSet& prompts, std::size_t parallelism);

struct EvalItem {
  std::string id;
  Instruction prompt;  // carries the constraint
  Language language = Language::en;
  LengthBucket bucket = LengthBucket::b2_4k;
  std::optional<std::string> response_text;
  std::optional<double> s_l;
  std::optional<double> s_q;
  std::optional<std::map<std::string, double>> aspect_scores;
};

std::string check_invariants(const EvalItem& item);

struct Benchmark {
  std::vector<EvalItem> items;
  // One message per language x bucket x kind cell whose count differs from
  // the largest cell. Non-fatal.
  std::vector<std::string> balance_warnings;
};

// JSONL of {id, language, bucket, constraint, prompt}. Throws SchemaViolation.
Benchmark load_benchmark(const std::filesystem::path& manifest);
std::vector<std::string> check_balance(const std::vector<EvalItem>& items);
// One manifest line for an item, the inverse of load_benchmark's parsing.
std::string benchmark_line(const EvalItem& item);

// JSONL of {id, response}; returns id -> response text.
std::map<std::string, std::string> load_outputs(const std::filesystem::path& path);

// Fills response_text and s_l for each item that has an output.
void score_lengths(std::vector<EvalItem>& items, const std::map<std::string, std::string>& outputs);

struct Aggregate {
  std::size_t n = 0;
  std::optional<double> s_l;  // mean S_L x 100
  std::optional<double> s_q;  // mean S_Q
};

struct Summary {
  Aggregate overall;
  std::map<std::string, Aggregate> by_bucket;
  std::map<std::string, Aggregate> by_kind;
  std::map<std::string, Aggregate> by_language;
};

Summary summarize(const std::vector<EvalItem>& items);
std::string summary_json(const Summary& s);
std::string results_jsonl(const std::vector<EvalItem>& items);

// Square matrix CSV; cell (i, j) is the win-rate of row model i against column j.
std::string winrate_csv(const std::vector<std::string>& names,
                        const std::vector<std::vector<std::optional<double>>>& matrix);

}  // namespace lengthsmith::eval
