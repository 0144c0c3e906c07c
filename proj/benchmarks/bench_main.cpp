#include <benchmark/benchmark.h>

#include <random>

#include "lengthsmith/curate.hpp"
#include "lengthsmith/eval.hpp"
#include "lengthsmith/mock_backend.hpp"
#include "lengthsmith/text.hpp"

using namespace lengthsmith;

namespace {

void BM_CountWordsEnglish(benchmark::State& state) {
  const auto text = backend::mock_generate(1, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(corpus::count_words(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_CountWordsEnglish)->Arg(1000)->Arg(10000);

void BM_CountWordsChinese(benchmark::State& state) {
  const auto text = backend::mock_generate(1, state.range(0), Language::zh);
  for (auto _ : state) benchmark::DoNotOptimize(corpus::count_words(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_CountWordsChinese)->Arg(1000)->Arg(10000);

void BM_FilterResponse(benchmark::State& state) {
  const auto base = make_initial_response("y", "i", backend::mock_generate(2, state.range(0)), 0);
  auto plus = make_initial_response("y.x1", "i", backend::mock_extend(base.text, 1.5, 3), 0);
  plus.role = ResponseRole::extended;
  plus.micro_iter = 1;
  plus.parent_response_id = base.id;
  for (auto _ : state) benchmark::DoNotOptimize(curate::filter_response(plus, base));
}
BENCHMARK(BM_FilterResponse)->Arg(1000)->Arg(8000);

void BM_LengthBiasSample(benchmark::State& state) {
  std::mt19937_64 eng(4);
  std::vector<ResponseRecord> recs(static_cast<std::size_t>(state.range(0)));
  for (auto& r : recs) r.length_words = static_cast<std::int64_t>(eng() % 100000);
  for (auto _ : state) benchmark::DoNotOptimize(curate::length_bias_sample(recs, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LengthBiasSample)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_DistinctN(benchmark::State& state) {
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back(backend::mock_generate(static_cast<std::uint64_t>(i), 2000));
  for (auto _ : state) benchmark::DoNotOptimize(eval::distinct_n(texts, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_DistinctN)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MockExtend(benchmark::State& state) {
  const auto text = backend::mock_generate(6, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(backend::mock_extend(text, 1.5, 7));
}
BENCHMARK(BM_MockExtend)->Arg(1000)->Arg(8000);

}  // namespace
BENCHMARK_MAIN();
