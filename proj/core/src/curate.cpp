#include "lengthsmith/curate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/rng.hpp"
#include "lengthsmith/text.hpp"
#include "ngram.hpp"

namespace lengthsmith::curate {

std::string FilterConfig::check() const {
  if (!(min_growth_ratio > 1.0)) return "min_growth_ratio must exceed 1";
  if (repeat_ngram_words < 2) return "repeat_ngram_words must be at least 2";
  if (repeat_max_count < 1) return "repeat_max_count must be at least 1";
  if (line_repeat < 2) return "line_repeat must be at least 2";
  if (!(script_minor_ratio_max >= 0.0 && script_minor_ratio_max < 0.5)) {
    return "script_minor_ratio_max must lie in [0, 0.5)";
  }
  return {};
}

bool inadequate_length(std::int64_t plus_words, std::int64_t base_words, double ratio) {
  const auto scaled = static_cast<std::int64_t>(std::llround(ratio * 1e6));
  return plus_words * 1'000'000 <= scaled * base_words;
}

bool has_repetition(std::string_view text, const FilterConfig& cfg) {
  std::unordered_map<std::string_view, int> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = corpus::trim(text.substr(start, end - start));
    if (!line.empty() && ++lines[line] >= cfg.line_repeat) return true;
    start = end + 1;
  }

  const auto ids = detail::ngram_ids(corpus::tokenize_words(text),
                                     static_cast<std::size_t>(cfg.repeat_ngram_words));
  std::vector<std::int64_t> counts(ids.size(), 0);
  for (auto id : ids) {
    if (++counts[id] > cfg.repeat_max_count) return true;
  }
  return false;
}

bool is_endless(std::string_view text) { return !corpus::ends_with_terminal_punct(corpus::trim(text)); }

bool is_code_switching(std::string_view text, double minor_ratio_max) {
  const auto c = corpus::count_script_letters(text);
  const std::size_t total = c.latin + c.cjk;
  if (total == 0) return false;
  const std::size_t minor = std::min(c.latin, c.cjk);
  return static_cast<double>(minor) > minor_ratio_max * static_cast<double>(total);
}

FilterVerdict filter_response(const ResponseRecord& y_plus, const ResponseRecord& y,
                              const FilterConfig& cfg) {
  if (y_plus.parent_response_id != y.id) {
    throw std::invalid_argument("response '" + y_plus.id + "' is not an extension of '" + y.id + "'");
  }
  FilterVerdict v;
  const auto plus_words = static_cast<std::int64_t>(corpus::count_words(y_plus.text));
  const auto base_words = static_cast<std::int64_t>(corpus::count_words(y.text));
  if (inadequate_length(plus_words, base_words, cfg.min_growth_ratio)) {
    v.failed_rules.push_back(FilterRule::inadequate_length);
  }
  if (has_repetition(y_plus.text, cfg)) v.failed_rules.push_back(FilterRule::repetition);
  if (is_endless(y_plus.text)) v.failed_rules.push_back(FilterRule::endless);
  if (is_code_switching(y_plus.text, cfg.script_minor_ratio_max)) {
    v.failed_rules.push_back(FilterRule::code_switching);
  }
  v.passed = v.failed_rules.empty();
  return v;
}

std::vector<double> percentile_ranks(const std::vector<std::int64_t>& lengths) {
  const std::size_t n = lengths.size();
  std::vector<double> ranks(n, 1.0);
  if (n <= 1) return ranks;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && lengths[order[j + 1]] == lengths[order[i]]) ++j;
    const double mean_pos = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_pos / denom;
    i = j + 1;
  }
  return ranks;
}

double keep_probability(double r) {
  const double d = 1.0 - r;
  return std::max(0.0, 1.0 - 2.0 * d * d * d);
}

SampleResult length_bias_sample(const std::vector<ResponseRecord>& passed, std::uint64_t seed) {
  if (passed.empty()) throw Error(ErrorCode::EmptyInput, "length-bias sampling needs at least one response");
  std::vector<std::int64_t> lengths;
  lengths.reserve(passed.size());
  for (const auto& r : passed) lengths.push_back(r.length_words);
  const auto ranks = percentile_ranks(lengths);

  Rng rng(seed);
  SampleResult out;
  for (std::size_t i = 0; i < passed.size(); ++i) {
    const double u = rng.uniform_open();
    const double d = 1.0 - ranks[i];
    auto rec = passed[i];
    if (!rec.filter_verdict) rec.filter_verdict = FilterVerdict{};
    if (u > 2.0 * d * d * d) {
      out.kept.push_back(std::move(rec));
    } else {
      rec.filter_verdict->dropped_by_sampler = true;
      out.dropped.push_back(std::move(rec));
    }
  }
  return out;
}

CurateResult curate(const std::vector<ResponseRecord>& extended,
                    const std::vector<ResponseRecord>& initial, const FilterConfig& cfg,
                    bool sampler, std::uint64_t seed) {
  std::unordered_map<std::string_view, const ResponseRecord*> parents;
  for (const auto& r : initial) parents.emplace(r.id, &r);

  CurateResult out;
  std::vector<ResponseRecord> passed;
  for (const auto& r : extended) {
    const auto it = r.parent_response_id ? parents.find(*r.parent_response_id) : parents.end();
    if (it == parents.end()) {
      throw SchemaViolation("$.parent_response_id",
                            "extended response '" + r.id + "' has no parent among initial responses");
    }
    auto rec = r;
    rec.filter_verdict = filter_response(r, *it->second, cfg);
    if (rec.filter_verdict->passed) {
      passed.push_back(std::move(rec));
    } else {
      out.rejects.push_back(std::move(rec));
    }
  }
  out.n_passed = passed.size();
  if (!sampler || passed.empty()) {
    out.filtered = std::move(passed);
  } else {
    auto s = length_bias_sample(passed, seed);
    out.filtered = std::move(s.kept);
    for (auto& d : s.dropped) out.rejects.push_back(std::move(d));
  }
  out.n_sampled = out.filtered.size();
  return out;
}

}  // namespace lengthsmith::curate
