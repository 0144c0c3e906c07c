#include "lengthsmith/augment.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/rng.hpp"
#include "lengthsmith/text.hpp"

namespace lengthsmith::augment {

namespace {

bool is_ascii_punct(char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

std::string lowercase_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

std::vector<std::string> token_set(std::string_view text) {
  auto t = normalized_tokens(text);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// Jaccard over sorted unique vectors. Exact normalized matches have identical
// sets, so they score 1.0 and are caught by the same threshold.
double sorted_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

}  // namespace

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto tok : corpus::tokenize_words(text)) {
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e && is_ascii_punct(tok[b])) ++b;
    while (e > b && is_ascii_punct(tok[e - 1])) --e;
    if (b < e) out.push_back(lowercase_ascii(tok.substr(b, e - b)));
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& t : normalized_tokens(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.contains(t) ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

bool is_near_duplicate(std::string_view candidate, std::string_view existing, const DedupConfig& cfg) {
  const auto a = normalized_tokens(candidate);
  const auto b = normalized_tokens(existing);
  if (a == b) return true;
  return jaccard(a, b) >= cfg.jaccard_threshold;
}

std::string parse_instruction_completion(std::string_view completion) {
  std::size_t start = 0;
  while (start <= completion.size()) {
    std::size_t end = completion.find('\n', start);
    if (end == std::string_view::npos) end = completion.size();
    std::string_view line = corpus::trim(completion.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    // Drop an echoed label such as "Instruction 3:" or "指令3：".
    for (std::string_view label : {std::string_view("Instruction"), std::string_view("指令")}) {
      if (line.substr(0, label.size()) == label) {
        std::size_t i = label.size();
        while (i < line.size() && (line[i] == ' ' || (line[i] >= '0' && line[i] <= '9'))) ++i;
        if (line.substr(i, 1) == ":") {
          line = corpus::trim(line.substr(i + 1));
        } else if (line.substr(i, 3) == "：") {
          line = corpus::trim(line.substr(i + 3));
        }
      }
    }
    if (!line.empty()) return std::string(line);
  }
  return {};
}

Verdict parse_yes_no(std::string_view completion) {
  std::string_view s = corpus::trim(completion);
  while (!s.empty() && (is_ascii_punct(s.front()) || s.front() == ' ')) s.remove_prefix(1);
  if (s.empty()) return Verdict::unparseable;
  std::size_t n = 0;
  while (n < s.size() && ((s[n] >= 'a' && s[n] <= 'z') || (s[n] >= 'A' && s[n] <= 'Z'))) ++n;
  if (n > 0) {
    const std::string word = lowercase_ascii(s.substr(0, n));
    if (word == "yes" || word == "y" || word == "true") return Verdict::yes;
    if (word == "no" || word == "n" || word == "false") return Verdict::no;
    return Verdict::unparseable;
  }
  for (std::string_view yes : {"是", "可以", "适合"}) {
    if (s.substr(0, yes.size()) == yes) return Verdict::yes;
  }
  for (std::string_view no : {"否", "不"}) {
    if (s.substr(0, no.size()) == no) return Verdict::no;
  }
  return Verdict::unparseable;
}

std::vector<Instruction> self_instruct_round(const std::vector<Instruction>& pool,
                                             backend::ChatBackend& backend,
                                             const prompts::PromptSet& prompts,
                                             const RoundOptions& opts) {
  if (pool.size() < 2) {
    throw PoolTooSmall("self-instruct needs at least 2 pool instructions, got " +
                       std::to_string(pool.size()));
  }
  Rng rng(opts.rng_seed);
  std::vector<std::pair<std::size_t, std::size_t>> exemplars;
  std::vector<backend::ChatRequest> requests;
  for (std::size_t k = 0; k < opts.n_new; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(pool.size()));
    auto j = static_cast<std::size_t>(rng.below(pool.size() - 1));
    if (j >= i) ++j;
    exemplars.emplace_back(i, j);
    const bool zh = pool[i].language == Language::zh;
    std::map<std::string, std::string> slots{{"prompt1", pool[i].text}, {"prompt2", pool[j].text}};
    requests.push_back(backend::ChatRequest::from_profile(
        backend.profile(), prompts::render(zh ? prompts.self_instruct_zh : prompts.self_instruct, slots),
        backend::Task::self_instruct, slots));
  }

  const auto results = backend::complete_batch(backend, requests, opts.parallelism);

  std::unordered_set<std::string> ids;
  for (const auto& p : pool) ids.insert(p.id);
  // Sorted unique token sets of everything accepted so far.
  std::vector<std::vector<std::string>> known;
  known.reserve(pool.size() + opts.n_new);
  for (const auto& p : pool) known.push_back(token_set(p.text));

  std::vector<Instruction> out;
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (!results[k].ok()) {
      spdlog::warn("self-instruct request {} failed: {}", k, results[k].error);
      continue;
    }
    std::string text = parse_instruction_completion(results[k].response->content);
    if (text.empty()) {
      spdlog::warn("self-instruct request {} produced no instruction", k);
      continue;
    }
    auto tokens = token_set(text);
    const bool dup = std::any_of(known.begin(), known.end(), [&](const auto& existing) {
      return sorted_jaccard(tokens, existing) >= opts.dedup.jaccard_threshold;
    });
    if (dup) continue;

    Instruction instr;
    instr.id = opts.id_prefix + "-i" + std::to_string(opts.macro_iter) + "-" + pad(k, 5);
    while (ids.contains(instr.id)) instr.id += "x";
    instr.text = text;
    instr.language = detect_language(text);
    instr.source = InstructionSource::self_instruct;
    instr.parents = {pool[exemplars[k].first].id, pool[exemplars[k].second].id};
    instr.created_at_iter = opts.macro_iter;
    ids.insert(instr.id);
    known.push_back(std::move(tokens));
    out.push_back(std::move(instr));
  }
  return out;
}

backend::ChatRequest validation_request(const Instruction& instr,
                                        const backend::BackendProfile& judge,
                                        const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{{"instruction", instr.text}};
  auto req = backend::ChatRequest::from_profile(judge, prompts::render(prompts.validate, slots),
                                                backend::Task::validate, slots);
  req.temperature = 0.0;
  return req;
}

bool validate_instruction(const Instruction& instr, backend::ChatBackend& judge,
                          const prompts::PromptSet& prompts) {
  const auto resp = judge.complete(validation_request(instr, judge.profile(), prompts));
  const Verdict v = parse_yes_no(resp.content);
  if (v == Verdict::unparseable) {
    spdlog::warn("validation reply for '{}' is unparseable; treating as unsuitable", instr.id);
  }
  return v == Verdict::yes;
}

std::vector<bool> validate_instructions(const std::vector<Instruction>& instrs,
                                        backend::ChatBackend& judge,
                                        const prompts::PromptSet& prompts,
                                        std::size_t parallelism) {
  std::vector<backend::ChatRequest> requests;
  requests.reserve(instrs.size());
  for (const auto& i : instrs) requests.push_back(validation_request(i, judge.profile(), prompts));
  const auto results = backend::complete_batch(judge, requests, parallelism);
  std::vector<bool> out;
  out.reserve(instrs.size());
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (!results[k].ok()) {
      spdlog::warn("validation of '{}' failed: {}", instrs[k].id, results[k].error);
      out.push_back(false);
      continue;
    }
    const Verdict v = parse_yes_no(results[k].response->content);
    if (v == Verdict::unparseable) {
      spdlog::warn("validation reply for '{}' is unparseable; treating as unsuitable", instrs[k].id);
    }
    out.push_back(v == Verdict::yes);
  }
  return out;
}

}  // namespace lengthsmith::augment
