#include "lengthsmith/records.hpp"

#include <array>
#include <set>
#include <utility>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/text.hpp"

namespace lengthsmith {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view s) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table,
                         E v) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Language, std::string_view>, 3> kLanguages{{
    {Language::en, "en"}, {Language::zh, "zh"}, {Language::other, "other"}}};
constexpr std::array<std::pair<InstructionSource, std::string_view>, 3> kSources{{
    {InstructionSource::seed, "seed"},
    {InstructionSource::self_instruct, "self_instruct"},
    {InstructionSource::rephrased, "rephrased"}}};
constexpr std::array<std::pair<ConstraintKind, std::string_view>, 4> kKinds{{
    {ConstraintKind::about, "about"},
    {ConstraintKind::range, "range"},
    {ConstraintKind::above, "above"},
    {ConstraintKind::below, "below"}}};
constexpr std::array<std::pair<ResponseRole, std::string_view>, 2> kRoles{{
    {ResponseRole::initial, "initial"}, {ResponseRole::extended, "extended"}}};
constexpr std::array<std::pair<FilterRule, std::string_view>, 4> kRules{{
    {FilterRule::inadequate_length, "inadequate_length"},
    {FilterRule::repetition, "repetition"},
    {FilterRule::endless, "endless"},
    {FilterRule::code_switching, "code_switching"}}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::NoSplitPoint: return "NoSplitPoint";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::MissingInstruction: return "MissingInstruction";
    case ErrorCode::ConstraintNotEmbedded: return "ConstraintNotEmbedded";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::JudgeParseFailure: return "JudgeParseFailure";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::TrainerHookFailure: return "TrainerHookFailure";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(Language v) { return name_of(kLanguages, v); }
std::string_view to_string(InstructionSource v) { return name_of(kSources, v); }
std::string_view to_string(ConstraintKind v) { return name_of(kKinds, v); }
std::string_view to_string(ResponseRole v) { return name_of(kRoles, v); }
std::string_view to_string(FilterRule v) { return name_of(kRules, v); }

std::optional<Language> parse_language(std::string_view s) { return lookup(kLanguages, s); }
std::optional<InstructionSource> parse_instruction_source(std::string_view s) {
  return lookup(kSources, s);
}
std::optional<ConstraintKind> parse_constraint_kind(std::string_view s) {
  return lookup(kKinds, s);
}
std::optional<ResponseRole> parse_response_role(std::string_view s) { return lookup(kRoles, s); }
std::optional<FilterRule> parse_filter_rule(std::string_view s) { return lookup(kRules, s); }

ResponseRecord make_initial_response(std::string id, std::string instruction_id,
                                     std::string text, std::int64_t macro_iter) {
  ResponseRecord r;
  r.id = std::move(id);
  r.instruction_id = std::move(instruction_id);
  r.length_words = static_cast<std::int64_t>(corpus::count_words(text));
  r.text = std::move(text);
  r.macro_iter = macro_iter;
  return r;
}

std::string check_invariants(const LengthConstraint& c) {
  if (c.kind == ConstraintKind::range) {
    if (c.x1 <= 0) return "range lower bound must be positive";
    if (c.x1 >= c.x2) return "range requires x1 < x2";
  } else if (c.x <= 0) {
    return "constraint target must be positive";
  }
  return {};
}

std::string check_invariants(const Instruction& i) {
  if (i.id.empty()) return "id must be nonempty";
  if (i.text.empty()) return "text must be nonempty";
  if (i.parents.size() > 2) return "at most two parents";
  if (i.source == InstructionSource::self_instruct && i.parents.size() != 2) {
    return "self_instruct instructions need exactly two parents";
  }
  if (i.source == InstructionSource::seed && !i.parents.empty()) {
    return "seed instructions have no parents";
  }
  if (i.created_at_iter < 0) return "created_at_iter must be >= 0";
  if (i.constraint) return check_invariants(*i.constraint);
  return {};
}

std::string check_invariants(const FilterVerdict& v) {
  if (v.passed != v.failed_rules.empty()) return "passed must equal failed_rules being empty";
  if (v.dropped_by_sampler && !v.passed) return "only passed records can be dropped by the sampler";
  std::set<FilterRule> seen(v.failed_rules.begin(), v.failed_rules.end());
  if (seen.size() != v.failed_rules.size()) return "failed_rules has duplicates";
  return {};
}

std::string check_invariants(const ResponseRecord& r) {
  if (r.id.empty()) return "id must be nonempty";
  if (r.length_words < 0) return "length_words must be non-negative";
  if (r.macro_iter < 0 || r.micro_iter < 0) return "iteration indices must be non-negative";
  const bool initial_micro = r.micro_iter == 0;
  const bool initial_role = r.role == ResponseRole::initial;
  const bool no_parent = !r.parent_response_id.has_value();
  if (initial_micro != initial_role || initial_role != no_parent) {
    return "micro_iter=0, role=initial and an absent parent must coincide";
  }
  if (static_cast<std::size_t>(r.length_words) != corpus::count_words(r.text)) {
    return "length_words does not match the text";
  }
  if (r.filter_verdict) return check_invariants(*r.filter_verdict);
  return {};
}

Language detect_language(std::string_view text) {
  switch (corpus::dominant_script(text)) {
    case corpus::Script::cjk: return Language::zh;
    case corpus::Script::latin: return Language::en;
    case corpus::Script::none: return Language::other;
  }
  return Language::other;
}

}  // namespace lengthsmith
