#include "lengthsmith/run_dir.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/jsonl.hpp"

namespace lengthsmith {

namespace {

detail::ordered_json stats_json(const LengthStats& s) {
  detail::ordered_json j;
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["p90"] = s.p90;
  return j;
}

LengthStats stats_from(const detail::json& j, const std::string& path) {
  detail::ObjectReader r(j, path);
  LengthStats s;
  s.n = static_cast<std::size_t>(r.integer("n"));
  s.mean = r.number("mean");
  s.median = r.number("median");
  s.p90 = r.number("p90");
  r.finish();
  return s;
}

detail::ordered_json bindings_json(const Bindings& b) {
  detail::ordered_json j;
  j["generator"] = detail::profile_to_json_value(b.generator);
  j["extender"] = detail::profile_to_json_value(b.extender);
  return j;
}

Bindings bindings_from(const detail::json& j, const std::string& path) {
  detail::ObjectReader r(j, path);
  Bindings b;
  b.generator = detail::profile_from_json_value(r.object("generator"), r.child("generator"));
  b.extender = detail::profile_from_json_value(r.object("extender"), r.child("extender"));
  r.finish();
  return b;
}

// Stat fields in manifest order; shared by the writer and the reader.
template <typename F>
void for_each_count(IterationStats& s, F&& f) {
  f("n_instructions", s.n_instructions);
  f("n_new_instructions", s.n_new_instructions);
  f("n_initial", s.n_initial);
  f("n_extended", s.n_extended);
  f("n_passed", s.n_passed);
  f("n_sampled", s.n_sampled);
  f("n_generator_sft", s.n_generator_sft);
  f("n_extender_sft", s.n_extender_sft);
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::augment: return "augment";
    case Stage::generate: return "generate";
    case Stage::extend: return "extend";
    case Stage::curate: return "curate";
    case Stage::build_sft: return "build_sft";
    case Stage::train: return "train";
  }
  return "augment";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

double percentile(const std::vector<std::int64_t>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * static_cast<double>(sorted[hi] - sorted[lo]);
}

LengthStats length_stats(std::vector<std::int64_t> lengths) {
  LengthStats s;
  s.n = lengths.size();
  if (lengths.empty()) return s;
  std::sort(lengths.begin(), lengths.end());
  const double sum = std::accumulate(lengths.begin(), lengths.end(), 0.0,
                                     [](double a, std::int64_t v) { return a + static_cast<double>(v); });
  s.mean = sum / static_cast<double>(lengths.size());
  s.median = percentile(lengths, 0.5);
  s.p90 = percentile(lengths, 0.9);
  return s;
}

bool IterationState::completed(Stage s) const {
  return std::find(stages_completed.begin(), stages_completed.end(), to_string(s)) !=
         stages_completed.end();
}

std::string RunManifest::check() const {
  for (std::size_t k = 0; k < iterations.size(); ++k) {
    const auto& s = iterations[k].stats;
    const auto& it = iterations[k];
    if (it.completed(Stage::curate) && !(s.n_sampled <= s.n_passed && s.n_passed <= s.n_extended)) {
      return "iteration " + std::to_string(k) + " violates n_sampled <= n_passed <= n_extended";
    }
  }
  if (macro_iters_completed < 0 ||
      macro_iters_completed > static_cast<std::int64_t>(iterations.size())) {
    return "macro_iters_completed is out of range";
  }
  return {};
}

std::string manifest_to_json(const RunManifest& m) {
  detail::ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["run_id"] = m.run_id;
  j["config_hash"] = m.config_hash;
  j["macro_iters_completed"] = m.macro_iters_completed;
  j["dataset_only"] = m.dataset_only;
  j["final_alignment_done"] = m.final_alignment_done;
  j["created_at"] = m.created_at;
  j["updated_at"] = m.updated_at;
  j["iterations"] = detail::ordered_json::array();
  for (auto it : m.iterations) {
    detail::ordered_json ij;
    ij["stages_completed"] = it.stages_completed;
    detail::ordered_json sj;
    for_each_count(it.stats, [&](const char* key, std::size_t& v) { sj[key] = v; });
    sj["initial_length"] = stats_json(it.stats.initial);
    sj["extended_length"] = stats_json(it.stats.extended);
    ij["stats"] = std::move(sj);
    ij["bindings"] = bindings_json(it.bindings);
    j["iterations"].push_back(std::move(ij));
  }
  if (m.next_bindings) j["next_bindings"] = bindings_json(*m.next_bindings);
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  const auto j = detail::parse_json(text);
  detail::ObjectReader r(j, "$");
  r.schema_version();
  RunManifest m;
  m.run_id = r.str("run_id");
  m.config_hash = r.str("config_hash");
  m.macro_iters_completed = r.integer("macro_iters_completed");
  m.dataset_only = r.boolean("dataset_only");
  m.final_alignment_done = r.boolean("final_alignment_done");
  m.created_at = r.str("created_at");
  m.updated_at = r.str("updated_at");
  const auto& iters = r.array("iterations");
  for (std::size_t k = 0; k < iters.size(); ++k) {
    const std::string path = "$.iterations[" + std::to_string(k) + "]";
    detail::ObjectReader ir(iters[k], path);
    IterationState it;
    it.stages_completed = ir.str_array("stages_completed");
    for (std::size_t s = 0; s < it.stages_completed.size(); ++s) {
      if (!parse_stage(it.stages_completed[s])) {
        detail::violation(ir.child("stages_completed"), "unknown stage '" + it.stages_completed[s] + "'");
      }
    }
    detail::ObjectReader sr(ir.object("stats"), ir.child("stats"));
    for_each_count(it.stats, [&](const char* key, std::size_t& v) {
      v = static_cast<std::size_t>(sr.integer(key));
    });
    it.stats.initial = stats_from(sr.object("initial_length"), sr.child("initial_length"));
    it.stats.extended = stats_from(sr.object("extended_length"), sr.child("extended_length"));
    sr.finish();
    it.bindings = bindings_from(ir.object("bindings"), ir.child("bindings"));
    ir.finish();
    m.iterations.push_back(std::move(it));
  }
  if (const auto* nb = r.opt_object("next_bindings")) m.next_bindings = bindings_from(*nb, "$.next_bindings");
  r.finish();
  detail::require_ok("$", m.check());
  return m;
}

std::filesystem::path RunDir::iter_dir(std::int64_t k) const {
  return root_ / ("iter-" + std::to_string(k));
}

std::filesystem::path RunDir::traces(std::int64_t k) const {
  return iter_dir(k) / "traces" / "extension_traces.jsonl";
}

RunManifest RunDir::load_manifest() const {
  try {
    return manifest_from_json(read_file(manifest()));
  } catch (const SchemaViolation& e) {
    throw Error(ErrorCode::Io, manifest().string() + ": " + e.what());
  }
}

void RunDir::save_manifest(RunManifest& m) const {
  m.updated_at = utc_timestamp();
  if (m.created_at.empty()) m.created_at = m.updated_at;
  if (auto p = m.check(); !p.empty()) throw Error(ErrorCode::StageFailure, "manifest: " + p);
  std::filesystem::create_directories(root_);
  write_file_atomic(manifest(), manifest_to_json(m));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace lengthsmith
