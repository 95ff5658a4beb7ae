#include <benchmark/benchmark.h>

#include "quill/ngram.hpp"
#include "quill/rng.hpp"

namespace {

void BM_NGramScoring(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  quill::Rng rng(2);
  std::vector<quill::TokenSeq> corpus;
  for (int s = 0; s < 500; ++s) {
    quill::TokenSeq content;
    for (int i = 0; i < 60; ++i) content.push_back(static_cast<quill::TokenId>(4 + rng.below(30)));
    corpus.push_back(quill::lm_padded(content, order));
  }
  const quill::NGramModel lm = quill::fit_ngram(corpus, order, 1.0, 34);
  quill::TokenSeq seq(corpus.front().begin() + order - 1, corpus.front().end());
  for (auto _ : state) benchmark::DoNotOptimize(lm.log_prob_seq(seq));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seq.size()));
}
BENCHMARK(BM_NGramScoring)->DenseRange(1, 6);

}  // namespace
