#include <benchmark/benchmark.h>

#include "quill/decoding.hpp"
#include "quill/model.hpp"

namespace {

quill::ModelConfig bench_config(int d) {
  quill::ModelConfig c;
  c.vocab_size = 60;
  c.d_model = d;
  c.n_heads = 4;
  c.d_ffn = 4 * d;
  c.max_seq_len = 128;
  return c;
}

quill::TokenSeq tokens(std::size_t n) {
  quill::TokenSeq s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<quill::TokenId>(4 + i % 50));
  return s;
}

void BM_ForwardTeacherForced(benchmark::State& state) {
  const auto params = quill::init_params<float>(bench_config(static_cast<int>(state.range(0))), 1);
  const auto src = tokens(60);
  auto dec = tokens(60);
  dec.front() = quill::Vocab::kBos;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quill::forward(params, src, dec, quill::Mode::kEval));
  }
}
BENCHMARK(BM_ForwardTeacherForced)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_GreedyDecode(benchmark::State& state) {
  const auto params = quill::init_params<float>(bench_config(64), 1);
  const quill::ModelTranslator model(params);
  const auto src = tokens(40);
  for (auto _ : state) benchmark::DoNotOptimize(quill::greedy_decode(model, src, 1.0, 60));
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);

}  // namespace
