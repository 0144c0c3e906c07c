#include "lengthsmith/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/text.hpp"
#include "ngram.hpp"

namespace lengthsmith::eval {

namespace {

constexpr int kJudgeAttempts = 3;

// The outermost {...} of a reply, tolerating prose or code fences around it.
std::optional<detail::json> extract_object(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto j = detail::json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

backend::ChatRequest pairwise_request(const std::string& instruction, const std::string& r1,
                                      const std::string& r2, const backend::BackendProfile& judge,
                                      const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{
      {"instruction", instruction}, {"response_1", r1}, {"response_2", r2}};
  std::string content = prompts::render(prompts.judge_pairwise, slots);
  auto req = backend::ChatRequest::from_profile(judge, std::move(content),
                                                backend::Task::judge_pairwise, std::move(slots));
  req.temperature = 0.0;
  return req;
}

struct Accumulator {
  Aggregate agg;
  double sl_sum = 0.0;
  std::size_t sl_n = 0;
  double sq_sum = 0.0;
  std::size_t sq_n = 0;

  void push(const EvalItem& item) {
    ++agg.n;
    if (item.s_l) {
      sl_sum += *item.s_l;
      ++sl_n;
    }
    if (item.s_q) {
      sq_sum += *item.s_q;
      ++sq_n;
    }
  }
  Aggregate done() const {
    Aggregate out = agg;
    if (sl_n > 0) out.s_l = 100.0 * sl_sum / static_cast<double>(sl_n);
    if (sq_n > 0) out.s_q = sq_sum / static_cast<double>(sq_n);
    return out;
  }
};

detail::ordered_json aggregate_json(const Aggregate& a) {
  detail::ordered_json j;
  j["n"] = a.n;
  j["s_l"] = a.s_l ? detail::ordered_json(*a.s_l) : detail::ordered_json(nullptr);
  j["s_q"] = a.s_q ? detail::ordered_json(*a.s_q) : detail::ordered_json(nullptr);
  return j;
}

std::string format_rate(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

std::string_view to_string(LengthBucket b) {
  switch (b) {
    case LengthBucket::b2_4k: return "2k-4k";
    case LengthBucket::b4_6k: return "4k-6k";
    case LengthBucket::b6_8k: return "6k-8k";
  }
  return "2k-4k";
}

std::optional<LengthBucket> parse_length_bucket(std::string_view s) {
  for (auto b : {LengthBucket::b2_4k, LengthBucket::b4_6k, LengthBucket::b6_8k}) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

TargetBounds target_bounds(const LengthConstraint& c) {
  if (!c.valid()) throw std::invalid_argument("invalid length constraint");
  switch (c.kind) {
    case ConstraintKind::about: return {8 * c.x, 12 * c.x};
    case ConstraintKind::range: return {10 * c.x1, 10 * c.x2};
    case ConstraintKind::above: return {10 * c.x, 15 * c.x};
    case ConstraintKind::below: return {5 * c.x, 10 * c.x};
  }
  return {};
}

double length_score(std::int64_t y_words, const LengthConstraint& c) {
  const auto b = target_bounds(c);
  const std::int64_t y10 = 10 * y_words;
  // With bounds in tenths, 2y/min - 1 = (20y - min)/min and 3 - 2y/max =
  // (3max - 20y)/max: one rounding step per score.
  if (y10 < b.min_tenths) {
    const std::int64_t num = 20 * y_words - b.min_tenths;
    return num <= 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(b.min_tenths);
  }
  if (y10 > b.max_tenths) {
    const std::int64_t num = 3 * b.max_tenths - 20 * y_words;
    return num <= 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(b.max_tenths);
  }
  return 1.0;
}

std::optional<QualityResult> parse_quality_reply(std::string_view reply) {
  const auto j = extract_object(reply);
  if (!j || j->size() != kAspects.size()) return std::nullopt;
  QualityResult out;
  std::int64_t sum = 0;
  for (auto aspect : kAspects) {
    const auto it = j->find(std::string(aspect));
    if (it == j->end() || !it->is_number_integer()) return std::nullopt;
    const auto v = it->get<std::int64_t>();
    if (v < 1 || v > 10) return std::nullopt;
    out.aspects[std::string(aspect)] = static_cast<double>(10 * v);
    sum += 10 * v;
  }
  out.s_q = static_cast<double>(sum) / static_cast<double>(kAspects.size());
  return out;
}

backend::ChatRequest quality_request(std::string_view instruction, std::string_view response,
                                     const backend::BackendProfile& judge,
                                     const prompts::PromptSet& prompts) {
  std::map<std::string, std::string> slots{{"instruction", std::string(instruction)},
                                           {"response", std::string(response)}};
  std::string content = prompts::render(prompts.judge_quality, slots);
  auto req = backend::ChatRequest::from_profile(judge, std::move(content),
                                                backend::Task::judge_quality, std::move(slots));
  req.temperature = 0.0;
  return req;
}

QualityResult quality_score(std::string_view instruction, std::string_view response,
                            backend::ChatBackend& judge, const prompts::PromptSet& prompts) {
  if (corpus::trim(response).empty()) throw std::invalid_argument("quality_score needs a response");
  auto out = quality_batch({{std::string(instruction), std::string(response)}}, judge, prompts, 1);
  if (out[0].result) return *out[0].result;
  if (out[0].error.rfind("judge reply", 0) == 0) throw JudgeParseFailure(out[0].error);
  throw BackendError(ErrorCode::RetriesExhausted, out[0].error);
}

std::vector<QualityOutcome> quality_batch(
    const std::vector<std::pair<std::string, std::string>>& items, backend::ChatBackend& judge,
    const prompts::PromptSet& prompts, std::size_t parallelism) {
  std::vector<QualityOutcome> out(items.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (corpus::trim(items[i].second).empty()) {
      out[i].error = "empty response";
    } else {
      pending.push_back(i);
    }
  }
  for (int attempt = 1; attempt <= kJudgeAttempts && !pending.empty(); ++attempt) {
    std::vector<backend::ChatRequest> requests;
    for (auto i : pending) {
      requests.push_back(quality_request(items[i].first, items[i].second, judge.profile(), prompts));
    }
    const auto results = backend::complete_batch(judge, requests, parallelism);
    std::vector<std::size_t> retry;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto i = pending[k];
      if (!results[k].ok()) {
        out[i].error = results[k].error;
        continue;
      }
      if (auto q = parse_quality_reply(results[k].response->content)) {
        out[i].result = std::move(*q);
        out[i].error.clear();
      } else {
        out[i].error = "judge reply has no valid seven-aspect score object after " +
                       std::to_string(attempt) + " attempt(s)";
        retry.push_back(i);
      }
    }
    pending = std::move(retry);
  }
  return out;
}

double distinct_n(const std::vector<std::string>& texts, std::size_t n) {
  if (n == 0) throw std::invalid_argument("distinct_n needs n >= 1");
  if (texts.empty()) throw std::invalid_argument("distinct_n needs at least one text");
  double sum = 0.0;
  for (const auto& t : texts) {
    const auto ids = detail::ngram_ids(corpus::tokenize_words(t), n);
    if (ids.empty()) {
      sum += 1.0;
      continue;
    }
    const auto unique = *std::max_element(ids.begin(), ids.end()) + 1;
    sum += static_cast<double>(unique) / static_cast<double>(ids.size());
  }
  return sum / static_cast<double>(texts.size());
}

std::optional<PairVerdict> parse_pairwise_reply(std::string_view reply) {
  const auto j = extract_object(reply);
  if (!j) return std::nullopt;
  const auto it = j->find("winner");
  if (it == j->end()) return std::nullopt;
  std::string w;
  if (it->is_string()) {
    w = it->get<std::string>();
  } else if (it->is_number_integer()) {
    w = std::to_string(it->get<std::int64_t>());
  } else {
    return std::nullopt;
  }
  if (w == "1") return PairVerdict::first;
  if (w == "2") return PairVerdict::second;
  if (w == "tie") return PairVerdict::tie;
  return std::nullopt;
}

WinRate win_rate(const std::vector<std::string>& instructions, const std::vector<std::string>& a,
                 const std::vector<std::string>& b, backend::ChatBackend& judge,
                 const prompts::PromptSet& prompts, std::size_t parallelism) {
  if (a.size() != b.size() || a.size() != instructions.size()) {
    throw std::invalid_argument("win_rate needs aligned output lists");
  }
  std::vector<backend::ChatRequest> requests;
  requests.reserve(2 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    requests.push_back(pairwise_request(instructions[i], a[i], b[i], judge.profile(), prompts));
    requests.push_back(pairwise_request(instructions[i], b[i], a[i], judge.profile(), prompts));
  }
  const auto results = backend::complete_batch(judge, requests, parallelism);

  WinRate w;
  for (std::size_t k = 0; k < results.size(); ++k) {
    std::optional<PairVerdict> v;
    if (results[k].ok()) v = parse_pairwise_reply(results[k].response->content);
    if (!v) {
      ++w.failed;
      continue;
    }
    ++w.valid;
    const bool a_first = k % 2 == 0;
    if (*v == PairVerdict::tie) {
      ++w.ties;
    } else if ((*v == PairVerdict::first) == a_first) {
      ++w.wins;
    } else {
      ++w.losses;
    }
  }
  if (w.failed > 0) spdlog::warn("{} of {} pairwise judgements failed", w.failed, results.size());
  w.rate = w.valid == 0 ? 0.5
                        : (static_cast<double>(w.wins) + 0.5 * static_cast<double>(w.ties)) /
                              static_cast<double>(w.valid);
  return w;
}

std::string check_invariants(const EvalItem& item) {
  if (!item.prompt.constraint) return "benchmark prompts carry a length constraint";
  if (auto p = check_invariants(*item.prompt.constraint); !p.empty()) return p;
  if (item.s_l && !item.response_text) return "s_l requires a response";
  if (item.s_l && (*item.s_l < 0.0 || *item.s_l > 1.0)) return "s_l must lie in [0, 1]";
  if (item.aspect_scores) {
    if (item.aspect_scores->size() != kAspects.size()) return "aspect_scores needs all seven aspects";
    for (auto a : kAspects) {
      if (!item.aspect_scores->contains(std::string(a))) return "missing aspect " + std::string(a);
    }
  }
  return {};
}

std::vector<std::string> check_balance(const std::vector<EvalItem>& items) {
  std::map<std::string, std::size_t> cells;
  for (auto lang : {Language::en, Language::zh}) {
    for (auto bucket : {LengthBucket::b2_4k, LengthBucket::b4_6k, LengthBucket::b6_8k}) {
      for (auto kind : kAllConstraintKinds) {
        cells[std::string(to_string(lang)) + "/" + std::string(to_string(bucket)) + "/" +
              std::string(to_string(kind))] = 0;
      }
    }
  }
  for (const auto& it : items) {
    const std::string key = std::string(to_string(it.language)) + "/" +
                            std::string(to_string(it.bucket)) + "/" +
                            std::string(to_string(it.prompt.constraint->kind));
    ++cells[key];
  }
  std::size_t expected = 0;
  for (const auto& [k, n] : cells) expected = std::max(expected, n);
  std::vector<std::string> warnings;
  for (const auto& [k, n] : cells) {
    if (n != expected) {
      warnings.push_back("cell " + k + " has " + std::to_string(n) + " items, expected " +
                         std::to_string(expected));
    }
  }
  return warnings;
}

Benchmark load_benchmark(const std::filesystem::path& manifest) {
  Benchmark out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(manifest)) {
    ++line_no;
    try {
      const auto j = detail::parse_json(line);
      detail::ObjectReader r(j, "$");
      r.allow("schema_version");
      EvalItem item;
      item.id = r.str("id");
      item.language = detail::parse_enum<Language>(r.child("language"), r.str("language"), parse_language);
      item.bucket = detail::parse_enum<LengthBucket>(r.child("bucket"), r.str("bucket"), parse_length_bucket);
      const auto& cj = r.object("constraint");
      item.prompt.constraint = detail::constraint_from_json(cj, r.child("constraint"));
      item.prompt.text = r.str("prompt");
      r.finish();
      if (!ids.insert(item.id).second) detail::violation("$.id", "duplicate id '" + item.id + "'");
      item.prompt.id = item.id;
      item.prompt.language = item.language;
      item.prompt.source = InstructionSource::rephrased;
      out.items.push_back(std::move(item));
    } catch (...) {
      rethrow_with_location(manifest, line_no);
    }
  }
  out.balance_warnings = check_balance(out.items);
  for (const auto& w : out.balance_warnings) spdlog::warn("benchmark balance: {}", w);
  return out;
}

std::string benchmark_line(const EvalItem& item) {
  detail::ordered_json j;
  j["id"] = item.id;
  j["language"] = std::string(to_string(item.language));
  j["bucket"] = std::string(to_string(item.bucket));
  j["constraint"] = detail::constraint_to_json(*item.prompt.constraint);
  j["prompt"] = item.prompt.text;
  return detail::dump(j);
}

std::map<std::string, std::string> load_outputs(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      const auto j = detail::parse_json(line);
      detail::ObjectReader r(j, "$");
      std::string id = r.str("id");
      std::string response = r.str("response");
      r.finish();
      if (!out.emplace(id, std::move(response)).second) {
        detail::violation("$.id", "duplicate id '" + id + "'");
      }
    } catch (...) {
      rethrow_with_location(path, line_no);
    }
  }
  return out;
}

void score_lengths(std::vector<EvalItem>& items, const std::map<std::string, std::string>& outputs) {
  for (auto& item : items) {
    const auto it = outputs.find(item.id);
    if (it == outputs.end()) continue;
    item.response_text = it->second;
    item.s_l = length_score(static_cast<std::int64_t>(corpus::count_words(it->second)),
                            *item.prompt.constraint);
  }
}

Summary summarize(const std::vector<EvalItem>& items) {
  Accumulator overall;
  std::map<std::string, Accumulator> bucket, kind, lang;
  for (const auto& it : items) {
    overall.push(it);
    bucket[std::string(to_string(it.bucket))].push(it);
    kind[std::string(to_string(it.prompt.constraint->kind))].push(it);
    lang[std::string(to_string(it.language))].push(it);
  }
  Summary s;
  s.overall = overall.done();
  for (const auto& [k, a] : bucket) s.by_bucket[k] = a.done();
  for (const auto& [k, a] : kind) s.by_kind[k] = a.done();
  for (const auto& [k, a] : lang) s.by_language[k] = a.done();
  return s;
}

std::string summary_json(const Summary& s) {
  detail::ordered_json j;
  j["overall"] = aggregate_json(s.overall);
  const std::pair<const char*, const std::map<std::string, Aggregate>*> groups[] = {
      {"by_bucket", &s.by_bucket}, {"by_kind", &s.by_kind}, {"by_language", &s.by_language}};
  for (const auto& [name, group] : groups) {
    detail::ordered_json g = detail::ordered_json::object();
    for (const auto& [k, a] : *group) g[k] = aggregate_json(a);
    j[name] = std::move(g);
  }
  j["notes"] = {{"s_l", "mean per-item length score multiplied by 100"},
                {"s_q", "mean of seven judge aspects, each rescaled from 1-10 to 10-100"}};
  return j.dump(2) + "\n";
}

std::string results_jsonl(const std::vector<EvalItem>& items) {
  std::string out;
  for (const auto& it : items) {
    detail::ordered_json j;
    j["id"] = it.id;
    j["language"] = std::string(to_string(it.language));
    j["bucket"] = std::string(to_string(it.bucket));
    j["constraint"] = detail::constraint_to_json(*it.prompt.constraint);
    if (it.response_text) j["response_words"] = corpus::count_words(*it.response_text);
    if (it.s_l) j["s_l"] = *it.s_l;
    if (it.s_q) j["s_q"] = *it.s_q;
    if (it.aspect_scores) {
      detail::ordered_json a;
      for (auto name : kAspects) a[std::string(name)] = it.aspect_scores->at(std::string(name));
      j["aspect_scores"] = std::move(a);
    }
    out += detail::dump(j);
    out += '\n';
  }
  return out;
}

std::string winrate_csv(const std::vector<std::string>& names,
                        const std::vector<std::vector<std::optional<double>>>& matrix) {
  std::string out = "model";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += names[i];
    for (std::size_t k = 0; k < names.size(); ++k) {
      out += ',';
      if (i < matrix.size() && k < matrix[i].size() && matrix[i][k]) out += format_rate(*matrix[i][k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace lengthsmith::eval
