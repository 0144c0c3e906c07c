#include "lengthsmith/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "json_util.hpp"
#include "lengthsmith/augment.hpp"
#include "lengthsmith/curate.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/extend.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/rng.hpp"
#include "lengthsmith/sftgen.hpp"
#include "lengthsmith/text.hpp"
#include "lengthsmith/trainer_hook.hpp"

namespace lengthsmith::pipeline {

namespace {

constexpr const char* kInstructions = "instructions.jsonl";
constexpr const char* kInitial = "initial.jsonl";
constexpr const char* kExtended = "extended.jsonl";
constexpr const char* kFiltered = "filtered.jsonl";
constexpr const char* kRejects = "rejects.jsonl";
constexpr const char* kSftGenerator = "sft_generator.jsonl";
constexpr const char* kSftExtender = "sft_extender.jsonl";

std::vector<std::int64_t> lengths_of(const std::vector<ResponseRecord>& rs) {
  std::vector<std::int64_t> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.length_words);
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::stopped: return "stopped";
    case RunStatus::dataset_only: return "dataset_only";
  }
  return "completed";
}

std::optional<Stage> parse_stage_name(std::string_view s) {
  std::string normalized(s);
  std::replace(normalized.begin(), normalized.end(), '-', '_');
  return parse_stage(normalized);
}

Pipeline::Pipeline(PipelineConfig config, std::filesystem::path run_dir, BackendFactory factory)
    : config_(std::move(config)), dir_(std::move(run_dir)), factory_(std::move(factory)) {
  if (auto p = config_.check(); !p.empty()) throw Error(ErrorCode::Config, p);
  prompts_ = config_.prompt_dir ? prompts::PromptSet::from_directory(*config_.prompt_dir)
                                : prompts::PromptSet::defaults();
  prompts_.validate_placeholders();
}

void Pipeline::open(bool resume) {
  if (opened_) return;
  const std::string hash = config_hash(config_);
  if (dir_.has_manifest()) {
    if (!resume) {
      throw Error(ErrorCode::Config,
                  dir_.root().string() + " already holds a run; resume it or pick another directory");
    }
    manifest_ = dir_.load_manifest();
    if (manifest_.config_hash != hash) {
      throw Error(ErrorCode::Config, "config does not match the run being resumed (hash " +
                                         manifest_.config_hash + ", now " + hash + ")");
    }
  } else {
    std::filesystem::create_directories(dir_.root());
    manifest_ = RunManifest{};
    manifest_.run_id = dir_.root().filename().string();
    if (manifest_.run_id.empty()) manifest_.run_id = dir_.root().parent_path().filename().string();
    manifest_.config_hash = hash;
    write_file_atomic(dir_.config(), config_to_json(config_));
    dir_.save_manifest(manifest_);
  }
  opened_ = true;
}

Bindings Pipeline::bindings_for(std::int64_t iter) const {
  if (iter == 0) return {config_.generator, config_.extender};
  if (!manifest_.next_bindings) {
    throw Error(ErrorCode::StageFailure, "no trained models for iteration " + std::to_string(iter));
  }
  return *manifest_.next_bindings;
}

std::optional<StopPoint> Pipeline::next_stage() {
  open(true);
  if (manifest_.dataset_only) return std::nullopt;
  for (std::int64_t k = 0; k < config_.macro_rounds; ++k) {
    if (k >= static_cast<std::int64_t>(manifest_.iterations.size())) return StopPoint{k, Stage::augment};
    const auto& it = manifest_.iterations[static_cast<std::size_t>(k)];
    for (auto s : kAllStages) {
      if (!it.completed(s)) return StopPoint{k, s};
    }
  }
  return std::nullopt;
}

void Pipeline::run_stage(std::int64_t iter, Stage stage) {
  const auto next = next_stage();
  if (!next) throw Error(ErrorCode::Config, "every macro-iteration of this run is complete");
  if (next->iter != iter || next->stage != stage) {
    throw Error(ErrorCode::Config, "the next stage is " + std::string(to_string(next->stage)) +
                                       " of iteration " + std::to_string(next->iter));
  }
  execute(iter, stage);
}

void Pipeline::execute(std::int64_t k, Stage stage) {
  while (static_cast<std::int64_t>(manifest_.iterations.size()) <= k) {
    IterationState st;
    st.bindings = bindings_for(static_cast<std::int64_t>(manifest_.iterations.size()));
    manifest_.iterations.push_back(std::move(st));
  }
  std::filesystem::create_directories(dir_.iter_dir(k));
  spdlog::info("iteration {}: {}", k, to_string(stage));
  try {
    switch (stage) {
      case Stage::augment: stage_augment(k); break;
      case Stage::generate: stage_generate(k); break;
      case Stage::extend: stage_extend(k); break;
      case Stage::curate: stage_curate(k); break;
      case Stage::build_sft: stage_build_sft(k); break;
      case Stage::train: stage_train(k); break;
    }
  } catch (const TrainerHookFailure&) {
    throw;
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(std::string(to_string(stage)), "iteration " + std::to_string(k) + ": " + e.what());
  }
  mark(k, stage);
}

void Pipeline::mark(std::int64_t k, Stage stage) {
  auto& it = manifest_.iterations[static_cast<std::size_t>(k)];
  it.stages_completed.emplace_back(to_string(stage));
  if (stage == Stage::train) manifest_.macro_iters_completed = k + 1;
  dir_.save_manifest(manifest_);
}

RunResult Pipeline::run(const RunOptions& opts) {
  open(opts.resume);
  while (const auto s = next_stage()) {
    execute(s->iter, s->stage);
    if (opts.stop_after && opts.stop_after->iter == s->iter && opts.stop_after->stage == s->stage) {
      return {RunStatus::stopped, manifest_};
    }
  }
  if (config_.final_alignment && !manifest_.final_alignment_done) final_alignment();
  return {manifest_.dataset_only ? RunStatus::dataset_only : RunStatus::completed, manifest_};
}

RunResult Pipeline::iterate(const RunOptions& opts) {
  open(true);
  auto first = next_stage();
  if (!first) return {manifest_.dataset_only ? RunStatus::dataset_only : RunStatus::completed, manifest_};
  const std::int64_t target = first->iter;
  while (const auto s = next_stage()) {
    if (s->iter != target) break;
    execute(s->iter, s->stage);
    if (opts.stop_after && opts.stop_after->iter == s->iter && opts.stop_after->stage == s->stage) {
      return {RunStatus::stopped, manifest_};
    }
  }
  return {manifest_.dataset_only ? RunStatus::dataset_only : RunStatus::completed, manifest_};
}

void Pipeline::stage_augment(std::int64_t k) {
  auto pool = k == 0 ? read_jsonl<Instruction>(config_.seed_instructions)
                     : read_jsonl<Instruction>(dir_.file(k - 1, kInstructions));
  const auto want = static_cast<std::int64_t>(
      std::ceil(static_cast<double>(pool.size()) * (config_.pool_growth - 1.0) - 1e-9));
  const auto n_new = static_cast<std::size_t>(std::clamp<std::int64_t>(want, 0, config_.max_new_per_iter));

  std::size_t accepted = 0;
  if (n_new > 0) {
    auto seed_model = factory_(config_.seed_model);
    augment::RoundOptions ro;
    ro.n_new = n_new;
    ro.rng_seed = derive_seed(config_.seed, {"augment", std::to_string(k)});
    ro.macro_iter = k;
    ro.parallelism = static_cast<std::size_t>(config_.parallelism);
    ro.dedup.jaccard_threshold = config_.dedup_threshold;
    auto candidates = augment::self_instruct_round(pool, *seed_model, prompts_, ro);
    const auto ok = augment::validate_instructions(candidates, *seed_model, prompts_, ro.parallelism);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!ok[i]) continue;
      pool.push_back(std::move(candidates[i]));
      ++accepted;
    }
    spdlog::info("iteration {}: {} of {} requested instructions accepted", k, accepted, n_new);
  }
  write_jsonl(dir_.file(k, kInstructions), pool);
  auto& stats = manifest_.iterations[static_cast<std::size_t>(k)].stats;
  stats.n_instructions = pool.size();
  stats.n_new_instructions = accepted;
}

void Pipeline::stage_generate(std::int64_t k) {
  const auto pool = read_jsonl<Instruction>(dir_.file(k, kInstructions));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config_.seed, {"cohort", std::to_string(k)}));
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(config_.cohort_size));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());

  const auto& binding = manifest_.iterations[static_cast<std::size_t>(k)].bindings;
  auto generator = factory_(binding.generator);
  std::vector<backend::ChatRequest> requests;
  requests.reserve(order.size());
  for (auto i : order) {
    requests.push_back(backend::ChatRequest::from_profile(generator->profile(), pool[i].text,
                                                          backend::Task::generate,
                                                          {{"instruction", pool[i].text}}));
  }
  const auto results =
      backend::complete_batch(*generator, requests, static_cast<std::size_t>(config_.parallelism));

  std::vector<ResponseRecord> initial;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& instr = pool[order[r]];
    if (!results[r].ok()) {
      spdlog::warn("iteration {}: generation for '{}' failed: {}", k, instr.id, results[r].error);
      continue;
    }
    if (corpus::trim(results[r].response->content).empty()) {
      spdlog::warn("iteration {}: empty generation for '{}'", k, instr.id);
      continue;
    }
    initial.push_back(make_initial_response("r" + std::to_string(k) + "-" + instr.id, instr.id,
                                            results[r].response->content, k));
  }
  write_jsonl(dir_.file(k, kInitial), initial);
  auto& stats = manifest_.iterations[static_cast<std::size_t>(k)].stats;
  stats.n_initial = initial.size();
  stats.initial = length_stats(lengths_of(initial));
}

void Pipeline::stage_extend(std::int64_t k) {
  const auto pool = read_jsonl<Instruction>(dir_.file(k, kInstructions));
  const auto initial = read_jsonl<ResponseRecord>(dir_.file(k, kInitial));
  std::unordered_map<std::string_view, const Instruction*> idx;
  for (const auto& i : pool) idx.emplace(i.id, &i);

  std::vector<extend::CohortItem> items;
  items.reserve(initial.size());
  for (const auto& r : initial) {
    const auto it = idx.find(r.instruction_id);
    if (it == idx.end()) throw MissingInstruction(r.instruction_id);
    items.push_back({it->second, r});
  }
  const auto& binding = manifest_.iterations[static_cast<std::size_t>(k)].bindings;
  auto extender = factory_(binding.extender);
  auto results = extend::extend_cohort(items, *extender, prompts_, static_cast<int>(config_.micro_rounds),
                                       static_cast<std::size_t>(config_.parallelism));

  std::vector<ResponseRecord> extended;
  std::vector<extend::ExtensionTrace> traces;
  for (auto& m : results) {
    if (m.extended) extended.push_back(std::move(m.record));
    for (auto& t : m.traces) traces.push_back(std::move(t));
  }
  write_jsonl(dir_.file(k, kExtended), extended);
  std::filesystem::create_directories(dir_.traces(k).parent_path());
  write_jsonl(dir_.traces(k), traces);
  auto& stats = manifest_.iterations[static_cast<std::size_t>(k)].stats;
  stats.n_extended = extended.size();
  stats.extended = length_stats(lengths_of(extended));
}

void Pipeline::stage_curate(std::int64_t k) {
  const auto initial = read_jsonl<ResponseRecord>(dir_.file(k, kInitial));
  const auto extended = read_jsonl<ResponseRecord>(dir_.file(k, kExtended));
  auto res = curate::curate(extended, initial, config_.filter, config_.sampler,
                            derive_seed(config_.seed, {"sample", std::to_string(k)}));
  write_jsonl(dir_.file(k, kFiltered), res.filtered);
  write_jsonl(dir_.file(k, kRejects), res.rejects);
  auto& stats = manifest_.iterations[static_cast<std::size_t>(k)].stats;
  stats.n_passed = res.n_passed;
  stats.n_sampled = res.n_sampled;
}

void Pipeline::stage_build_sft(std::int64_t k) {
  const auto pool = read_jsonl<Instruction>(dir_.file(k, kInstructions));
  const auto initial = read_jsonl<ResponseRecord>(dir_.file(k, kInitial));
  const auto filtered = read_jsonl<ResponseRecord>(dir_.file(k, kFiltered));
  const auto gen = sftgen::build_generator_set(filtered, pool, k);
  const auto ext = sftgen::build_extender_set(filtered, initial, pool, prompts_,
                                              derive_seed(config_.seed, {"drop", std::to_string(k)}), k);
  write_jsonl(dir_.file(k, kSftGenerator), gen);
  write_jsonl(dir_.file(k, kSftExtender), ext);
  auto& stats = manifest_.iterations[static_cast<std::size_t>(k)].stats;
  stats.n_generator_sft = gen.size();
  stats.n_extender_sft = ext.size();
}

void Pipeline::stage_train(std::int64_t k) {
  if (!config_.trainer_hook) {
    spdlog::info("no trainer hook configured; stopping after dataset emission");
    manifest_.dataset_only = true;
    manifest_.next_bindings.reset();
    return;
  }
  TrainerHookRequest req;
  req.command_template = *config_.trainer_hook;
  req.generator_sft = std::filesystem::absolute(dir_.file(k, kSftGenerator));
  req.extender_sft = std::filesystem::absolute(dir_.file(k, kSftExtender));
  req.iter = k;
  req.work_dir = std::filesystem::absolute(dir_.iter_dir(k));
  req.current = manifest_.iterations[static_cast<std::size_t>(k)].bindings;
  manifest_.next_bindings = run_trainer_hook(req);
  spdlog::info("iteration {}: next generator '{}', extender '{}'", k, manifest_.next_bindings->generator.model,
               manifest_.next_bindings->extender.model);
}

void Pipeline::final_alignment() {
  open(true);
  std::vector<sftgen::IterationData> data;
  for (std::size_t k = 0; k < manifest_.iterations.size(); ++k) {
    const auto& it = manifest_.iterations[k];
    if (!it.completed(Stage::generate)) continue;
    const auto ik = static_cast<std::int64_t>(k);
    sftgen::IterationData d;
    d.macro_iter = ik;
    d.instructions = read_jsonl<Instruction>(dir_.file(ik, kInstructions));
    d.initial = read_jsonl<ResponseRecord>(dir_.file(ik, kInitial));
    if (it.completed(Stage::curate)) d.filtered = read_jsonl<ResponseRecord>(dir_.file(ik, kFiltered));
    data.push_back(std::move(d));
  }
  auto seed_model = factory_(config_.seed_model);
  const auto examples = sftgen::collect_final_alignment(data, *seed_model, prompts_,
                                                        static_cast<std::size_t>(config_.parallelism));
  std::string content;
  for (const auto& e : examples) {
    content += to_jsonl(e);
    content += '\n';
  }
  if (config_.mixin) {
    for (const auto& line : read_lines(*config_.mixin)) {
      content += line;
      content += '\n';
    }
  }
  write_file_atomic(dir_.sft_final(), content);
  manifest_.final_alignment_done = true;
  dir_.save_manifest(manifest_);
}

Report build_report(const RunDir& dir, std::int64_t bin_width) {
  if (bin_width <= 0) throw std::invalid_argument("histogram bin width must be positive");
  const auto manifest = dir.load_manifest();
  Report rep;
  rep.lengths_csv = "iter,role,percentile,value\n";
  rep.histogram_csv = "iter,role,bin_start,bin_end,count\n";
  detail::ordered_json summary;
  summary["run_id"] = manifest.run_id;
  summary["macro_iters_completed"] = manifest.macro_iters_completed;
  summary["iterations"] = detail::ordered_json::array();

  constexpr int kPercentiles[] = {0, 10, 25, 50, 75, 90, 100};
  for (std::size_t k = 0; k < manifest.iterations.size(); ++k) {
    const auto& it = manifest.iterations[k];
    const auto ik = static_cast<std::int64_t>(k);
    const std::pair<const char*, Stage> roles[] = {
        {"initial", Stage::generate}, {"extended", Stage::extend}, {"filtered", Stage::curate}};
    const char* files[] = {kInitial, kExtended, kFiltered};
    detail::ordered_json ij;
    ij["iter"] = ik;
    for (std::size_t r = 0; r < 3; ++r) {
      if (!it.completed(roles[r].second)) continue;
      auto lengths = lengths_of(read_jsonl<ResponseRecord>(dir.file(ik, files[r])));
      std::sort(lengths.begin(), lengths.end());
      const auto stats = length_stats(lengths);
      ij[roles[r].first] = {{"n", stats.n}, {"mean", stats.mean}, {"median", stats.median}, {"p90", stats.p90}};
      if (lengths.empty()) continue;
      const std::string prefix = std::to_string(k) + "," + roles[r].first + ",";
      for (int p : kPercentiles) {
        rep.lengths_csv += prefix + std::to_string(p) + "," + fmt_double(percentile(lengths, p / 100.0)) + "\n";
      }
      std::map<std::int64_t, std::size_t> bins;
      for (auto v : lengths) ++bins[v / bin_width];
      for (std::int64_t b = 0; b <= lengths.back() / bin_width; ++b) {
        rep.histogram_csv += prefix + std::to_string(b * bin_width) + "," + std::to_string((b + 1) * bin_width) +
                             "," + std::to_string(bins[b]) + "\n";
      }
    }
    summary["iterations"].push_back(std::move(ij));
  }
  rep.summary_json = summary.dump(2) + "\n";
  return rep;
}

}  // namespace lengthsmith::pipeline
