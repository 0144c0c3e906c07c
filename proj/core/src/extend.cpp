#include "lengthsmith/extend.hpp"

#include <stdexcept>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/text.hpp"

namespace lengthsmith::extend {

namespace {

struct Pending {
  std::size_t item;
  ExtensionTrace trace;
  std::size_t input_words = 0;
  std::string input_text;
};

void reject(ExtensionTrace& t, std::string note) {
  t.accepted = false;
  t.note = std::move(note);
}

// Runs one two-stage round for every entry, two batches in total.
void run_round(std::vector<Pending>& work, const std::vector<const Instruction*>& instrs,
               backend::ChatBackend& extender, const prompts::PromptSet& prompts,
               std::size_t parallelism) {
  std::vector<backend::ChatRequest> requests;
  std::vector<std::size_t> owners;
  for (std::size_t w = 0; w < work.size(); ++w) {
    auto& p = work[w];
    try {
      auto halves = corpus::split_half_at_punct(p.input_text);
      p.trace.stage1_input = std::move(halves.first);
    } catch (const NoSplitPoint& e) {
      reject(p.trace, std::string("no split point: ") + e.what());
      continue;
    }
    requests.push_back(stage1_request(*instrs[p.item], p.trace.stage1_input, extender.profile(), prompts));
    owners.push_back(w);
  }
  auto results = backend::complete_batch(extender, requests, parallelism);

  requests.clear();
  std::vector<std::size_t> stage2_owners;
  for (std::size_t r = 0; r < results.size(); ++r) {
    auto& p = work[owners[r]];
    if (!results[r].ok()) {
      reject(p.trace, "stage 1 backend error: " + results[r].error);
      continue;
    }
    p.trace.stage1_output = results[r].response->content;
    if (corpus::trim(p.trace.stage1_output).empty()) {
      reject(p.trace, "stage 1 returned no text");
      continue;
    }
    p.trace.demonstration = corpus::truncate_two_thirds(p.trace.stage1_output);
    requests.push_back(stage2_request(*instrs[p.item], p.input_text, p.trace.demonstration,
                                      extender.profile(), prompts));
    stage2_owners.push_back(owners[r]);
  }
  results = backend::complete_batch(extender, requests, parallelism);

  for (std::size_t r = 0; r < results.size(); ++r) {
    auto& p = work[stage2_owners[r]];
    if (!results[r].ok()) {
      reject(p.trace, "stage 2 backend error: " + results[r].error);
      continue;
    }
    p.trace.stage2_output = seam_continuation(results[r].response->content);
    p.trace.final_text = p.trace.demonstration + p.trace.stage2_output;
    if (corpus::count_words(p.trace.final_text) > p.input_words) {
      p.trace.accepted = true;
    } else {
      reject(p.trace, "extension is not longer than its input");
    }
  }
}

std::string extended_id(const std::string& base, std::int64_t rounds) {
  return base + ".x" + std::to_string(rounds);
}

}  // namespace

std::string check_invariants(const ExtensionTrace& t, std::size_t input_words) {
  if (!t.accepted) return {};
  if (t.demonstration != corpus::truncate_two_thirds(t.stage1_output)) {
    return "demonstration is not the two-thirds truncation of the stage-1 output";
  }
  if (t.final_text != t.demonstration + t.stage2_output) {
    return "final_text is not demonstration + stage2_output";
  }
  if (corpus::count_words(t.final_text) <= input_words) return "accepted trace is not longer";
  return {};
}

std::string seam_continuation(std::string_view completion) {
  const std::string_view body = corpus::trim(completion);
  if (body.empty()) return {};
  return "\n\n" + std::string(body);
}

backend::ChatRequest stage1_request(const Instruction& instr, const std::string& first_half,
                                    const backend::BackendProfile& profile,
                                    const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{{"prompt", instr.text}, {"initial_response", first_half}};
  std::string content = prompts::render(prompts.extend, slots);
  return backend::ChatRequest::from_profile(profile, std::move(content),
                                            backend::Task::extend, std::move(slots));
}

backend::ChatRequest stage2_request(const Instruction& instr, const std::string& full_response,
                                    const std::string& demonstration,
                                    const backend::BackendProfile& profile,
                                    const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{
      {"prompt", instr.text}, {"initial_response", full_response}, {"draft", demonstration}};
  std::string content = prompts::render(prompts.extend_stage2, slots);
  return backend::ChatRequest::from_profile(profile, std::move(content),
                                            backend::Task::extend_stage2, std::move(slots));
}

ExtensionTrace extend_once(const Instruction& instr, const ResponseRecord& response,
                           backend::ChatBackend& extender, const prompts::PromptSet& prompts) {
  std::vector<Pending> work(1);
  work[0].item = 0;
  work[0].trace.input_response_id = response.id;
  work[0].input_text = response.text;
  work[0].input_words = corpus::count_words(response.text);
  run_round(work, {&instr}, extender, prompts, 1);
  return std::move(work[0].trace);
}

MicroResult micro_iterate(const Instruction& instr, const ResponseRecord& response,
                          backend::ChatBackend& extender, const prompts::PromptSet& prompts,
                          int rounds) {
  auto out = extend_cohort({{&instr, response}}, extender, prompts, rounds, 1);
  return std::move(out.front());
}

std::vector<MicroResult> extend_cohort(const std::vector<CohortItem>& items,
                                       backend::ChatBackend& extender,
                                       const prompts::PromptSet& prompts, int rounds,
                                       std::size_t parallelism) {
  if (rounds < 1) throw std::invalid_argument("micro-iteration needs at least one round");
  std::vector<const Instruction*> instrs;
  std::vector<MicroResult> results(items.size());
  std::vector<std::string> current(items.size());
  std::vector<std::int64_t> accepted(items.size(), 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    instrs.push_back(items[i].instruction);
    results[i].record = items[i].response;
    current[i] = items[i].response.text;
  }

  std::vector<std::size_t> active(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) active[i] = i;

  for (int round = 1; round <= rounds && !active.empty(); ++round) {
    std::vector<Pending> work;
    work.reserve(active.size());
    for (std::size_t i : active) {
      Pending p;
      p.item = i;
      p.trace.round = round;
      p.trace.input_response_id =
          round == 1 ? items[i].response.id : extended_id(items[i].response.id, round - 1);
      p.input_text = current[i];
      p.input_words = corpus::count_words(current[i]);
      work.push_back(std::move(p));
    }
    run_round(work, instrs, extender, prompts, parallelism);

    std::vector<std::size_t> still_active;
    for (auto& p : work) {
      if (p.trace.accepted) {
        current[p.item] = p.trace.final_text;
        accepted[p.item] = round;
        still_active.push_back(p.item);
      }
      results[p.item].traces.push_back(std::move(p.trace));
    }
    active = std::move(still_active);
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (accepted[i] == 0) continue;
    const auto& parent = items[i].response;
    ResponseRecord rec;
    rec.id = extended_id(parent.id, accepted[i]);
    rec.instruction_id = parent.instruction_id;
    rec.text = std::move(current[i]);
    rec.length_words = static_cast<std::int64_t>(corpus::count_words(rec.text));
    rec.macro_iter = parent.macro_iter;
    rec.micro_iter = accepted[i];
    rec.parent_response_id = parent.id;
    rec.role = ResponseRole::extended;
    results[i].record = std::move(rec);
    results[i].extended = true;
  }
  return results;
}

}  // namespace lengthsmith::extend

namespace lengthsmith {

std::string JsonlCodec<extend::ExtensionTrace>::encode(const extend::ExtensionTrace& v) {
  detail::ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["input_response_id"] = v.input_response_id;
  j["round"] = v.round;
  j["stage1_input"] = v.stage1_input;
  j["stage1_output"] = v.stage1_output;
  j["demonstration"] = v.demonstration;
  j["stage2_output"] = v.stage2_output;
  j["final_text"] = v.final_text;
  j["accepted"] = v.accepted;
  if (!v.note.empty()) j["note"] = v.note;
  return detail::dump(j);
}

extend::ExtensionTrace JsonlCodec<extend::ExtensionTrace>::decode(std::string_view line) {
  const auto j = detail::parse_json(line);
  detail::ObjectReader r(j, "$");
  r.schema_version();
  extend::ExtensionTrace t;
  t.input_response_id = r.str("input_response_id");
  t.round = r.integer("round");
  t.stage1_input = r.str("stage1_input");
  t.stage1_output = r.str("stage1_output");
  t.demonstration = r.str("demonstration");
  t.stage2_output = r.str("stage2_output");
  t.final_text = r.str("final_text");
  t.accepted = r.boolean("accepted");
  t.note = r.opt_str("note").value_or("");
  r.finish();
  if (t.accepted && t.final_text != t.demonstration + t.stage2_output) {
    detail::violation("$.final_text", "must equal demonstration + stage2_output");
  }
  return t;
}

}  // namespace lengthsmith
