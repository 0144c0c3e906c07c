#include "lengthsmith/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/jsonl.hpp"

namespace lengthsmith {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

detail::ordered_json filter_json(const curate::FilterConfig& f) {
  detail::ordered_json j;
  j["min_growth_ratio"] = f.min_growth_ratio;
  j["repeat_ngram_words"] = f.repeat_ngram_words;
  j["repeat_max_count"] = f.repeat_max_count;
  j["line_repeat"] = f.line_repeat;
  j["script_minor_ratio_max"] = f.script_minor_ratio_max;
  return j;
}

detail::ordered_json to_value(const PipelineConfig& c, bool for_hash) {
  detail::ordered_json j;
  j["seed"] = c.seed;
  j["macro_rounds"] = c.macro_rounds;
  j["micro_rounds"] = c.micro_rounds;
  if (!for_hash) j["parallelism"] = c.parallelism;
  j["cohort_size"] = c.cohort_size;
  j["pool_growth"] = c.pool_growth;
  j["max_new_per_iter"] = c.max_new_per_iter;
  j["dedup_threshold"] = c.dedup_threshold;
  detail::ordered_json b;
  b["generator"] = detail::profile_to_json_value(c.generator);
  b["extender"] = detail::profile_to_json_value(c.extender);
  b["seed"] = detail::profile_to_json_value(c.seed_model);
  b["judge"] = detail::profile_to_json_value(c.judge);
  j["backends"] = std::move(b);
  j["seed_instructions"] = c.seed_instructions.generic_string();
  if (c.prompt_dir) j["prompt_dir"] = c.prompt_dir->generic_string();
  if (c.mixin) j["mixin"] = c.mixin->generic_string();
  j["filter"] = filter_json(c.filter);
  j["sampler"] = c.sampler;
  j["final_alignment"] = c.final_alignment;
  if (c.trainer_hook) j["trainer_hook"] = *c.trainer_hook;
  return j;
}

}  // namespace

std::string PipelineConfig::check() const {
  if (macro_rounds < 1) return "macro_rounds must be at least 1";
  if (micro_rounds < 1) return "micro_rounds must be at least 1";
  if (parallelism < 1) return "parallelism must be at least 1";
  if (cohort_size < 1) return "cohort_size must be at least 1";
  if (!(pool_growth >= 1.0)) return "pool_growth must be at least 1";
  if (max_new_per_iter < 0) return "max_new_per_iter must be non-negative";
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) return "dedup_threshold must lie in (0, 1]";
  for (const auto* p : {&generator, &extender, &seed_model, &judge}) {
    if (auto e = p->check(); !e.empty()) return "backend '" + p->name + "': " + e;
  }
  if (auto e = filter.check(); !e.empty()) return "filter: " + e;
  if (seed_instructions.empty()) return "seed_instructions is required";
  if (!std::filesystem::is_regular_file(seed_instructions)) {
    return "seed_instructions file not found: " + seed_instructions.string();
  }
  if (prompt_dir && !std::filesystem::is_directory(*prompt_dir)) {
    return "prompt_dir not found: " + prompt_dir->string();
  }
  if (mixin && !std::filesystem::is_regular_file(*mixin)) return "mixin file not found: " + mixin->string();
  if (trainer_hook && trainer_hook->empty()) return "trainer_hook must not be empty when set";
  return {};
}

PipelineConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  const auto j = detail::parse_json(text);
  detail::ObjectReader r(j, "$");
  PipelineConfig c;
  if (auto v = r.opt_integer("seed")) c.seed = static_cast<std::uint64_t>(*v);
  c.macro_rounds = r.opt_integer("macro_rounds").value_or(c.macro_rounds);
  c.micro_rounds = r.opt_integer("micro_rounds").value_or(c.micro_rounds);
  c.parallelism = r.opt_integer("parallelism").value_or(c.parallelism);
  c.cohort_size = r.opt_integer("cohort_size").value_or(c.cohort_size);
  c.pool_growth = r.opt_number("pool_growth").value_or(c.pool_growth);
  c.max_new_per_iter = r.opt_integer("max_new_per_iter").value_or(c.max_new_per_iter);
  c.dedup_threshold = r.opt_number("dedup_threshold").value_or(c.dedup_threshold);
  if (const auto* b = r.opt_object("backends")) {
    detail::ObjectReader br(*b, r.child("backends"));
    const std::pair<const char*, backend::BackendProfile*> slots[] = {
        {"generator", &c.generator}, {"extender", &c.extender}, {"seed", &c.seed_model}, {"judge", &c.judge}};
    for (const auto& [key, target] : slots) {
      if (const auto* p = br.opt_object(key)) *target = detail::profile_from_json_value(*p, br.child(key));
    }
    br.finish();
  }
  if (auto v = r.opt_str("seed_instructions")) c.seed_instructions = resolve(base_dir, *v);
  if (auto v = r.opt_str("prompt_dir")) c.prompt_dir = resolve(base_dir, *v);
  if (auto v = r.opt_str("mixin")) c.mixin = resolve(base_dir, *v);
  if (const auto* f = r.opt_object("filter")) {
    detail::ObjectReader fr(*f, r.child("filter"));
    auto& fc = c.filter;
    fc.min_growth_ratio = fr.opt_number("min_growth_ratio").value_or(fc.min_growth_ratio);
    fc.repeat_ngram_words = fr.opt_integer("repeat_ngram_words").value_or(fc.repeat_ngram_words);
    fc.repeat_max_count = fr.opt_integer("repeat_max_count").value_or(fc.repeat_max_count);
    fc.line_repeat = fr.opt_integer("line_repeat").value_or(fc.line_repeat);
    fc.script_minor_ratio_max = fr.opt_number("script_minor_ratio_max").value_or(fc.script_minor_ratio_max);
    fr.finish();
  }
  c.sampler = r.opt_boolean("sampler").value_or(c.sampler);
  c.final_alignment = r.opt_boolean("final_alignment").value_or(c.final_alignment);
  if (auto v = r.opt_str("trainer_hook")) c.trainer_hook = *v;
  r.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return config_from_json(text, path.parent_path());
  } catch (const SchemaViolation& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

std::string config_to_json(const PipelineConfig& c) { return to_value(c, false).dump(2) + "\n"; }

std::string config_hash(const PipelineConfig& c) {
  const std::string canonical = to_value(c, true).dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Config, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void force_mock(PipelineConfig& c) {
  for (auto* p : {&c.generator, &c.extender, &c.seed_model, &c.judge}) p->kind = backend::BackendKind::mock;
}

}  // namespace lengthsmith
