#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lengthsmith/records.hpp"

// Rule-based filtering of extended responses and length-biased down-sampling.
namespace lengthsmith::curate {

struct FilterConfig {
  double min_growth_ratio = 1.2;
  std::int64_t repeat_ngram_words = 20;
  std::int64_t repeat_max_count = 2;  // an n-gram seen more often than this fails
  std::int64_t line_repeat = 3;       // identical nonempty lines at or above this fail
  double script_minor_ratio_max = 0.05;

  std::string check() const;
};

// Rule 1. Compared in fixed point (ratio to 1e-6) so the 120% boundary is exact.
bool inadequate_length(std::int64_t plus_words, std::int64_t base_words, double ratio);
bool has_repetition(std::string_view text, const FilterConfig& cfg);
bool is_endless(std::string_view text);
bool is_code_switching(std::string_view text, double minor_ratio_max);

// Evaluates every rule; `failed_rules` lists all failures in rule order.
// Throws std::invalid_argument when y_plus is not a child of y.
FilterVerdict filter_response(const ResponseRecord& y_plus, const ResponseRecord& y,
                              const FilterConfig& cfg = {});

// Percentile rank in [0, 1] per element: shortest 0, longest 1, linear in sort
// position, ties sharing the mean of their positions. A single element gets 1.
std::vector<double> percentile_ranks(const std::vector<std::int64_t>& lengths);

// max(0, 1 - 2(1-r)^3).
double keep_probability(double r);

struct SampleResult {
  std::vector<ResponseRecord> kept;
  std::vector<ResponseRecord> dropped;  // verdict marked dropped_by_sampler
};

// Keeps a record iff u > 2(1-r)^3 with one u in (0,1) drawn per record in input
// order. Throws Error(EmptyInput) on an empty list.
SampleResult length_bias_sample(const std::vector<ResponseRecord>& passed, std::uint64_t seed);

struct CurateResult {
  std::vector<ResponseRecord> filtered;  // passed and kept
  std::vector<ResponseRecord> rejects;   // failed a rule or dropped by the sampler
  std::size_t n_passed = 0;
  std::size_t n_sampled = 0;
};

// Filters every extended record against its parent in `initial`, then samples
// the survivors when `sampler` is on. A missing parent is a SchemaViolation.
CurateResult curate(const std::vector<ResponseRecord>& extended,
                    const std::vector<ResponseRecord>& initial, const FilterConfig& cfg,
                    bool sampler, std::uint64_t seed);

}  // namespace lengthsmith::curate
