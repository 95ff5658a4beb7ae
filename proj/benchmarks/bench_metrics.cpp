#include <benchmark/benchmark.h>

#include "quill/metrics.hpp"
#include "quill/rng.hpp"

namespace {

std::u32string random_text(quill::Rng& rng, std::size_t len) {
  std::u32string s;
  for (std::size_t i = 0; i < len; ++i) s += static_cast<char32_t>(U'a' + rng.below(26));
  return s;
}

void BM_EditDistance(benchmark::State& state) {
  quill::Rng rng(1);
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::u32string a = random_text(rng, len);
  const std::u32string b = random_text(rng, len);
  for (auto _ : state) benchmark::DoNotOptimize(quill::edit_distance(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EditDistance)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_TextStats(benchmark::State& state) {
  const std::string text = "The little dinosaur runs to the big green forest. It eats leaves!";
  for (auto _ : state) benchmark::DoNotOptimize(quill::text_stats(text));
}
BENCHMARK(BM_TextStats);

}  // namespace
