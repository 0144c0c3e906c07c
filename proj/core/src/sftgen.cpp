#include "lengthsmith/sftgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/rng.hpp"
#include "lengthsmith/text.hpp"

namespace lengthsmith::sftgen {

namespace {

using InstructionIndex = std::unordered_map<std::string_view, const Instruction*>;

InstructionIndex index_instructions(const std::vector<Instruction>& instructions) {
  InstructionIndex idx;
  for (const auto& i : instructions) idx.emplace(i.id, &i);
  return idx;
}

const Instruction& lookup(const InstructionIndex& idx, const std::string& id) {
  const auto it = idx.find(id);
  if (it == idx.end()) throw MissingInstruction(id);
  return *it->second;
}

SftExample make_example(SftKind kind, std::string user, std::string assistant, SftMeta meta) {
  SftExample e;
  e.kind = kind;
  e.messages.push_back({backend::MessageRole::user, std::move(user)});
  e.messages.push_back({backend::MessageRole::assistant, std::move(assistant)});
  e.meta = std::move(meta);
  return e;
}

std::int64_t round100(std::int64_t v) { return (v + 50) / 100 * 100; }
std::int64_t floor_09(std::int64_t t) { return 9 * t / 10; }
std::int64_t ceil_11(std::int64_t t) { return (11 * t + 9) / 10; }

// Evaluation bounds of each constraint kind, checked in integers.
bool satisfies(const LengthConstraint& c, std::int64_t t) {
  if (!c.valid()) return false;
  switch (c.kind) {
    case ConstraintKind::about: return 4 * c.x <= 5 * t && 5 * t <= 6 * c.x;
    case ConstraintKind::range: return c.x1 <= t && t <= c.x2;
    case ConstraintKind::above: return c.x <= t && 2 * t <= 3 * c.x;
    case ConstraintKind::below: return c.x <= 2 * t && t <= c.x;
  }
  return false;
}

std::string group_thousands(std::int64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i + 3 - lead) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// `needle` appears with no digit immediately before or after it.
bool contains_number(std::string_view text, std::string_view needle) {
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_digit(text[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == text.size() || !is_digit(text[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

backend::ChatRequest rephrase_request(const RephraseJob& job, const LengthConstraint& c,
                                      const backend::BackendProfile& profile,
                                      const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{
      {"instruction", job.instruction.text},
      {"constraint", constraint_phrase(c, job.instruction.language)}};
  std::string content = prompts::render(prompts.rephrase, slots);
  return backend::ChatRequest::from_profile(profile, std::move(content),
                                            backend::Task::rephrase, std::move(slots));
}

Instruction rephrased(const RephraseJob& job, const LengthConstraint& c, std::string text) {
  Instruction out;
  out.id = job.instruction.id + ".c-" + std::string(to_string(c.kind)) + "-" +
           std::to_string(job.target_words);
  out.text = std::move(text);
  out.language = job.instruction.language;
  out.source = InstructionSource::rephrased;
  out.parents = {job.instruction.id};
  out.constraint = c;
  out.created_at_iter = job.instruction.created_at_iter;
  return out;
}

}  // namespace

std::string_view to_string(SftKind k) {
  switch (k) {
    case SftKind::generator: return "generator";
    case SftKind::extender: return "extender";
    case SftKind::final_alignment: return "final";
  }
  return "generator";
}

std::optional<SftKind> parse_sft_kind(std::string_view s) {
  for (auto k : {SftKind::generator, SftKind::extender, SftKind::final_alignment}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string check_invariants(const SftExample& e) {
  if (e.messages.size() != 2) return "an example has exactly two turns";
  if (e.messages[0].role != backend::MessageRole::user) return "the first turn must be the user's";
  if (e.messages[1].role != backend::MessageRole::assistant) {
    return "the second turn must be the assistant's";
  }
  if (e.kind == SftKind::final_alignment && !e.meta.constraint) {
    return "final-alignment examples carry a length constraint";
  }
  if (e.meta.constraint) {
    if (auto p = check_invariants(*e.meta.constraint); !p.empty()) return p;
  }
  if (e.meta.target_length_words < 0) return "target_length_words must be non-negative";
  return {};
}

std::vector<SftExample> build_generator_set(const std::vector<ResponseRecord>& kept,
                                            const std::vector<Instruction>& instructions,
                                            std::int64_t macro_iter) {
  const auto idx = index_instructions(instructions);
  std::vector<SftExample> out;
  out.reserve(kept.size());
  for (const auto& r : kept) {
    const auto& instr = lookup(idx, r.instruction_id);
    out.push_back(make_example(SftKind::generator, instr.text, r.text,
                               {macro_iter, r.instruction_id, r.id, r.length_words, std::nullopt}));
  }
  return out;
}

std::size_t lines_to_drop(std::size_t n, double fraction) {
  if (n < 2) return 0;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::string drop_lines(std::string_view y, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("drop_lines fraction must lie in (0, 1)");
  }
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= y.size()) {
    std::size_t end = y.find('\n', start);
    if (end == std::string_view::npos) end = y.size();
    auto line = y.substr(start, end - start);
    if (!corpus::trim(line).empty()) lines.push_back(line);
    start = end + 1;
  }
  const std::size_t n = lines.size();
  if (n < 2) return std::string(y);

  const std::size_t k = lines_to_drop(n, fraction);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < k; ++i) removed[order[i]] = true;

  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    if (!out.empty()) out += '\n';
    out += lines[i];
  }
  return out;
}

std::vector<SftExample> build_extender_set(const std::vector<ResponseRecord>& kept,
                                           const std::vector<ResponseRecord>& parents,
                                           const std::vector<Instruction>& instructions,
                                           const prompts::PromptSet& prompts,
                                           std::uint64_t seed, std::int64_t macro_iter) {
  const auto idx = index_instructions(instructions);
  std::unordered_map<std::string_view, const ResponseRecord*> by_id;
  for (const auto& p : parents) by_id.emplace(p.id, &p);

  std::vector<SftExample> out;
  out.reserve(kept.size());
  for (const auto& r : kept) {
    const auto& instr = lookup(idx, r.instruction_id);
    const auto it = r.parent_response_id ? by_id.find(*r.parent_response_id) : by_id.end();
    if (it == by_id.end()) {
      throw SchemaViolation("$.parent_response_id", "response '" + r.id + "' has no parent record");
    }
    const std::string draft = drop_lines(it->second->text, 0.15, derive_seed(seed, {"drop", r.id}));
    std::string user = prompts::render(prompts.extend, {{"prompt", instr.text}, {"initial_response", draft}});
    out.push_back(make_example(SftKind::extender, std::move(user), r.text,
                               {macro_iter, r.instruction_id, r.id, r.length_words, std::nullopt}));
  }
  return out;
}

LengthConstraint constraint_for_target(std::int64_t t, ConstraintKind kind) {
  if (t <= 0) throw std::invalid_argument("constraint target must be positive");
  LengthConstraint rounded;
  LengthConstraint exact;
  switch (kind) {
    case ConstraintKind::about:
      rounded = LengthConstraint::about(round100(t));
      exact = LengthConstraint::about(t);
      break;
    case ConstraintKind::range: {
      rounded = LengthConstraint::range(round100(floor_09(t)), round100(ceil_11(t)));
      const std::int64_t lo = std::max<std::int64_t>(1, floor_09(t));
      exact = LengthConstraint::range(lo, std::max(lo + 1, ceil_11(t)));
      break;
    }
    case ConstraintKind::above:
      rounded = LengthConstraint::above(round100(floor_09(t)));
      // Tiny targets: floor(0.9t) can fall under 2t/3, putting t past 1.5x.
      exact = LengthConstraint::above(std::max(floor_09(t), (2 * t + 2) / 3));
      break;
    case ConstraintKind::below:
      rounded = LengthConstraint::below(round100(ceil_11(t)));
      exact = LengthConstraint::below(ceil_11(t));
      break;
  }
  return satisfies(rounded, t) ? rounded : exact;
}

std::string constraint_phrase(const LengthConstraint& c, Language lang) {
  const bool zh = lang == Language::zh;
  const std::string x = std::to_string(c.x);
  switch (c.kind) {
    case ConstraintKind::about: return zh ? "约" + x + "字" : "about " + x + " words";
    case ConstraintKind::range: {
      const std::string a = std::to_string(c.x1);
      const std::string b = std::to_string(c.x2);
      return zh ? a + "到" + b + "字之间" : "between " + a + " and " + b + " words";
    }
    case ConstraintKind::above: return zh ? "超过" + x + "字" : "more than " + x + " words";
    case ConstraintKind::below: return zh ? "少于" + x + "字" : "fewer than " + x + " words";
  }
  return {};
}

bool mentions_constraint(std::string_view text, const LengthConstraint& c) {
  auto has = [&](std::int64_t v) {
    return contains_number(text, std::to_string(v)) || contains_number(text, group_thousands(v));
  };
  if (c.kind == ConstraintKind::range) return has(c.x1) && has(c.x2);
  return has(c.x);
}

std::vector<RephraseOutcome> rephrase_batch(const std::vector<RephraseJob>& jobs,
                                            backend::ChatBackend& seed_model,
                                            const prompts::PromptSet& prompts,
                                            std::size_t parallelism) {
  constexpr int kAttempts = 3;
  std::vector<RephraseOutcome> out(jobs.size());
  std::vector<LengthConstraint> constraints;
  constraints.reserve(jobs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    constraints.push_back(constraint_for_target(jobs[i].target_words, jobs[i].kind));
    pending.push_back(i);
  }

  for (int attempt = 1; attempt <= kAttempts && !pending.empty(); ++attempt) {
    std::vector<backend::ChatRequest> requests;
    requests.reserve(pending.size());
    for (std::size_t i : pending) {
      requests.push_back(rephrase_request(jobs[i], constraints[i], seed_model.profile(), prompts));
    }
    const auto results = backend::complete_batch(seed_model, requests, parallelism);
    std::vector<std::size_t> retry;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const std::size_t i = pending[k];
      if (!results[k].ok()) {
        out[i].error = results[k].error;
        // Transport-level failures were already retried inside the backend.
        continue;
      }
      std::string text(corpus::trim(results[k].response->content));
      if (!text.empty() && mentions_constraint(text, constraints[i])) {
        out[i].instruction = rephrased(jobs[i], constraints[i], std::move(text));
        out[i].error.clear();
      } else {
        out[i].error = "rephrased instruction does not mention the length constraint";
        retry.push_back(i);
      }
    }
    pending = std::move(retry);
  }
  return out;
}

Instruction rephrase_with_length(const Instruction& instr, std::int64_t target_words,
                                 ConstraintKind kind, backend::ChatBackend& seed_model,
                                 const prompts::PromptSet& prompts) {
  auto res = rephrase_batch({{instr, target_words, kind}}, seed_model, prompts, 1);
  if (res[0].instruction) return std::move(*res[0].instruction);
  if (res[0].error.find("does not mention") != std::string::npos) {
    throw ConstraintNotEmbedded("instruction '" + instr.id + "': " + res[0].error);
  }
  throw BackendError(ErrorCode::RetriesExhausted, res[0].error);
}

std::vector<SftExample> collect_final_alignment(const std::vector<IterationData>& iterations,
                                                backend::ChatBackend& seed_model,
                                                const prompts::PromptSet& prompts,
                                                std::size_t parallelism) {
  std::unordered_map<std::string_view, const Instruction*> idx;
  for (const auto& it : iterations) {
    for (const auto& i : it.instructions) idx.emplace(i.id, &i);
  }

  struct Source {
    const ResponseRecord* response;
    std::int64_t macro_iter;
  };
  std::vector<Source> sources;
  std::unordered_set<std::string_view> seen;
  for (const auto& it : iterations) {
    for (const auto* set : {&it.initial, &it.filtered}) {
      for (const auto& r : *set) {
        if (seen.insert(r.id).second) sources.push_back({&r, it.macro_iter});
      }
    }
  }
  if (sources.empty()) throw Error(ErrorCode::EmptyRun, "no completed iteration has responses");

  std::vector<RephraseJob> jobs;
  jobs.reserve(sources.size());
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto& r = *sources[k].response;
    const auto it = idx.find(r.instruction_id);
    if (it == idx.end()) throw MissingInstruction(r.instruction_id);
    const auto words = static_cast<std::int64_t>(corpus::count_words(r.text));
    jobs.push_back({*it->second, std::max<std::int64_t>(1, words), kAllConstraintKinds[k % 4]});
  }

  const auto outcomes = rephrase_batch(jobs, seed_model, prompts, parallelism);
  std::vector<SftExample> out;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (!outcomes[k].instruction) {
      spdlog::warn("skipping response '{}' in final alignment: {}", sources[k].response->id,
                   outcomes[k].error);
      continue;
    }
    const auto& r = *sources[k].response;
    const auto& instr = *outcomes[k].instruction;
    out.push_back(make_example(SftKind::final_alignment, instr.text, r.text,
                               {sources[k].macro_iter, r.instruction_id, r.id,
                                jobs[k].target_words, instr.constraint}));
  }
  return out;
}

}  // namespace lengthsmith::sftgen

namespace lengthsmith {

std::string JsonlCodec<sftgen::SftExample>::encode(const sftgen::SftExample& v) {
  detail::ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["kind"] = std::string(sftgen::to_string(v.kind));
  j["messages"] = detail::ordered_json::array();
  for (const auto& m : v.messages) {
    detail::ordered_json mj;
    mj["role"] = std::string(backend::to_string(m.role));
    mj["content"] = m.content;
    j["messages"].push_back(std::move(mj));
  }
  detail::ordered_json meta;
  meta["macro_iter"] = v.meta.macro_iter;
  meta["instruction_id"] = v.meta.instruction_id;
  meta["response_id"] = v.meta.response_id;
  meta["target_length_words"] = v.meta.target_length_words;
  if (v.meta.constraint) meta["constraint"] = detail::constraint_to_json(*v.meta.constraint);
  j["meta"] = std::move(meta);
  return detail::dump(j);
}

sftgen::SftExample JsonlCodec<sftgen::SftExample>::decode(std::string_view line) {
  const auto j = detail::parse_json(line);
  detail::ObjectReader r(j, "$");
  r.schema_version();
  sftgen::SftExample e;
  e.kind = detail::parse_enum<sftgen::SftKind>(r.child("kind"), r.str("kind"), sftgen::parse_sft_kind);
  const auto& msgs = r.array("messages");
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const std::string path = r.child("messages") + "[" + std::to_string(i) + "]";
    if (!msgs[i].is_object()) detail::violation(path, "expected an object");
    detail::ObjectReader m(msgs[i], path);
    backend::ChatMessage cm;
    cm.role = detail::parse_enum<backend::MessageRole>(m.child("role"), m.str("role"),
                                                       backend::parse_message_role);
    cm.content = m.str("content");
    m.finish();
    e.messages.push_back(std::move(cm));
  }
  const auto& meta_j = r.object("meta");
  detail::ObjectReader meta(meta_j, r.child("meta"));
  e.meta.macro_iter = meta.integer("macro_iter");
  e.meta.instruction_id = meta.str("instruction_id");
  e.meta.response_id = meta.str("response_id");
  e.meta.target_length_words = meta.integer("target_length_words");
  if (const auto* c = meta.opt_object("constraint")) {
    e.meta.constraint = detail::constraint_from_json(*c, meta.child("constraint"));
  }
  meta.finish();
  r.finish();
  detail::require_ok("$", sftgen::check_invariants(e));
  return e;
}

}  // namespace lengthsmith
