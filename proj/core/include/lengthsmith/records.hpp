#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lengthsmith {

enum class Language { en, zh, other };
enum class InstructionSource { seed, self_instruct, rephrased };
enum class ConstraintKind { about, range, above, below };
enum class ResponseRole { initial, extended };
enum class FilterRule { inadequate_length, repetition, endless, code_switching };

std::string_view to_string(Language v);
std::string_view to_string(InstructionSource v);
std::string_view to_string(ConstraintKind v);
std::string_view to_string(ResponseRole v);
std::string_view to_string(FilterRule v);

std::optional<Language> parse_language(std::string_view s);
std::optional<InstructionSource> parse_instruction_source(std::string_view s);
std::optional<ConstraintKind> parse_constraint_kind(std::string_view s);
std::optional<ResponseRole> parse_response_role(std::string_view s);
std::optional<FilterRule> parse_filter_rule(std::string_view s);

inline constexpr ConstraintKind kAllConstraintKinds[] = {
    ConstraintKind::about, ConstraintKind::range, ConstraintKind::above,
    ConstraintKind::below};

// Word targets. `x` is used by about/above/below, `x1`/`x2` by range.
struct LengthConstraint {
  ConstraintKind kind = ConstraintKind::about;
  std::int64_t x = 0;
  std::int64_t x1 = 0;
  std::int64_t x2 = 0;

  static LengthConstraint about(std::int64_t v) { return {ConstraintKind::about, v, 0, 0}; }
  static LengthConstraint above(std::int64_t v) { return {ConstraintKind::above, v, 0, 0}; }
  static LengthConstraint below(std::int64_t v) { return {ConstraintKind::below, v, 0, 0}; }
  static LengthConstraint range(std::int64_t lo, std::int64_t hi) {
    return {ConstraintKind::range, 0, lo, hi};
  }

  bool valid() const noexcept {
    return kind == ConstraintKind::range ? (x1 > 0 && x1 < x2) : x > 0;
  }
  bool operator==(const LengthConstraint&) const = default;
};

struct Instruction {
  std::string id;
  std::string text;
  Language language = Language::en;
  InstructionSource source = InstructionSource::seed;
  std::vector<std::string> parents;
  std::optional<LengthConstraint> constraint;
  std::int64_t created_at_iter = 0;

  bool operator==(const Instruction&) const = default;
};

struct FilterVerdict {
  bool passed = true;
  std::vector<FilterRule> failed_rules;
  bool dropped_by_sampler = false;

  bool operator==(const FilterVerdict&) const = default;
};

struct ResponseRecord {
  std::string id;
  std::string instruction_id;
  std::string text;
  std::int64_t length_words = 0;
  std::int64_t macro_iter = 0;
  std::int64_t micro_iter = 0;
  std::optional<std::string> parent_response_id;
  ResponseRole role = ResponseRole::initial;
  std::optional<FilterVerdict> filter_verdict;

  bool operator==(const ResponseRecord&) const = default;
};

// Builds an initial response with length_words measured from the text.
ResponseRecord make_initial_response(std::string id, std::string instruction_id,
                                     std::string text, std::int64_t macro_iter);

// Each returns an empty string when the record satisfies its invariants,
// otherwise a description of the first violation.
std::string check_invariants(const LengthConstraint& c);
std::string check_invariants(const Instruction& i);
std::string check_invariants(const FilterVerdict& v);
std::string check_invariants(const ResponseRecord& r);

// Language guess from the dominant script: CJK -> zh, Latin -> en.
Language detect_language(std::string_view text);

}  // namespace lengthsmith
