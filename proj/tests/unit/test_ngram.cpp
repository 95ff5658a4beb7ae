#include <cmath>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "quill/error.hpp"
#include "quill/ngram.hpp"
#include "quill/rng.hpp"

using namespace quill;

namespace {

// Toy alphabet for the hand examples: ids 0 = a, 1 = b, 2 = EOS, K = 3.
// Ids 0..2 double as the specials of the real vocabulary, so BOS must be
// an id outside the alphabet; the unigram/bigram histories below never
// reach it except as padding.
constexpr TokenId kA = 0, kB = 1, kE = 2, kToyBos = 3;

NGramModel toy(int order) {
  NGramModel m(order, 1.0, 3, kToyBos);
  TokenSeq padded(static_cast<std::size_t>(order - 1), kToyBos);
  padded.insert(padded.end(), {kA, kB, kE});
  m.add_sequence(padded);
  return m;
}

}  // namespace

TEST_CASE("unigram counts") {
  const NGramModel m = toy(1);
  const auto& table = m.counts(1);
  REQUIRE(table.size() == 1);
  const HistoryCounts& h = table.begin()->second;
  CHECK(h.total == 3);
  CHECK(h.next.at(kA) == 1);
  CHECK(h.next.at(kB) == 1);
  CHECK(h.next.at(kE) == 1);
}

TEST_CASE("hand-computed smoothing values") {
  // p1(a) = (1 + 1/3) / (3 + 1) = 1/3
  const NGramModel uni = toy(1);
  CHECK(uni.prob_token(kA, {}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // p2(b | a) = (1 + 1 * p1(b)) / (1 + 1) = 2/3
  const NGramModel bi = toy(2);
  const TokenSeq history_a = {kA};
  CHECK(bi.prob_token(kB, history_a) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // log p(a, b, EOS) = ln p(a|BOS) + ln p(b|a) + ln p(EOS|b), each factor
  // from the recursion: p(a|BOS) = (1 + 1/3)/2, p(b|a) = 2/3, p(EOS|b) = 2/3.
  const double expected = std::log((1.0 + 1.0 / 3.0) / 2.0) + std::log(2.0 / 3.0) +
                          std::log((1.0 + 1.0 / 3.0) / 2.0);
  const TokenSeq seq = {kA, kB, kE};
  CHECK(bi.log_prob_seq(seq) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("zero-count models are uniform") {
  const NGramModel m(4, 1.0, 7);
  const TokenSeq h = {4, 5};
  for (TokenId w = 0; w < 7; ++w) CHECK(m.log_prob_token(w, h) == doctest::Approx(std::log(1.0 / 7)));
  const TokenSeq eos_only = {Vocab::kEos};
  CHECK(m.log_prob_seq(eos_only) == doctest::Approx(std::log(1.0 / 7)));

  const NGramModel empty = fit_ngram(std::span<const TokenSeq>{}, 3, 1.0, 5);
  CHECK(empty.prob_token(2, {}) == doctest::Approx(0.2));
}

TEST_CASE("probabilities normalize for random histories at orders 1-6") {
  Rng rng(17);
  const int K = 9;
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 60; ++i) {
    TokenSeq content;
    const auto len = 1 + rng.below(15);
    for (std::uint64_t j = 0; j < len; ++j) content.push_back(static_cast<TokenId>(4 + rng.below(5)));
    corpus.push_back(content);
  }
  for (int order = 1; order <= 6; ++order) {
    std::vector<TokenSeq> padded;
    for (const auto& c : corpus) padded.push_back(lm_padded(c, order));
    const NGramModel m = fit_ngram(padded, order, 1.0, K);
    for (int trial = 0; trial < 100; ++trial) {
      TokenSeq history;
      const auto len = rng.below(8);
      for (std::uint64_t j = 0; j < len; ++j) history.push_back(static_cast<TokenId>(rng.below(K)));
      double total = 0.0;
      for (TokenId w = 0; w < K; ++w) total += std::exp(m.log_prob_token(w, history));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("sequence score decomposes into token scores") {
  Rng rng(3);
  std::vector<TokenSeq> padded;
  for (int i = 0; i < 20; ++i) {
    TokenSeq c;
    for (int j = 0; j < 6; ++j) c.push_back(static_cast<TokenId>(4 + rng.below(4)));
    padded.push_back(lm_padded(c, 3));
  }
  const NGramModel m = fit_ngram(padded, 3, 0.5, 8);
  for (int trial = 0; trial < 20; ++trial) {
    TokenSeq seq;
    const auto len = rng.below(10);
    for (std::uint64_t j = 0; j < len; ++j) seq.push_back(static_cast<TokenId>(4 + rng.below(4)));
    seq.push_back(Vocab::kEos);
    double sum = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      sum += m.log_prob_token(seq[i], std::span<const TokenId>(seq.data(), i));
    }
    CHECK(m.log_prob_seq(seq) == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("fit does not depend on sequence order") {
  std::vector<TokenSeq> a = {lm_padded(TokenSeq{4, 5}, 2), lm_padded(TokenSeq{5, 5, 6}, 2)};
  std::vector<TokenSeq> b = {a[1], a[0]};
  CHECK(fit_ngram(a, 2, 1.0, 7) == fit_ngram(b, 2, 1.0, 7));
}

TEST_CASE("stored totals equal the sum of their counts") {
  std::vector<TokenSeq> seqs = {lm_padded(TokenSeq{4, 5, 4, 4}, 3), lm_padded(TokenSeq{6}, 3)};
  const NGramModel m = fit_ngram(seqs, 3, 1.0, 7);
  for (int order = 1; order <= 3; ++order) {
    for (const auto& [history, counts] : m.counts(order)) {
      std::uint64_t sum = 0;
      for (const auto& [w, c] : counts.next) sum += c;
      CHECK(sum == counts.total);
      CHECK(history.size() == static_cast<std::size_t>(order - 1));
    }
  }
}

TEST_CASE("another occurrence of (h, w) raises p(w | h)") {
  NGramModel m = fit_ngram(std::vector<TokenSeq>{lm_padded(TokenSeq{4, 5}, 2)}, 2, 1.0, 7);
  const TokenSeq h = {4};
  const double before = m.prob_token(6, h);
  m.add_sequence(lm_padded(TokenSeq{4, 6}, 2));
  CHECK(m.prob_token(6, h) > before);
}

TEST_CASE("order below one is rejected") {
  CHECK_THROWS_AS(NGramModel(0, 1.0, 5), InvalidArgument);
  CHECK_THROWS_AS(fit_ngram(std::span<const TokenSeq>{}, 0, 1.0, 5), InvalidArgument);
}

TEST_CASE("model files round-trip and reject bad headers") {
  testing::TempDir dir("ngram");
  const Vocab vocab = build_vocab(std::vector<std::string>{"hello world"});
  const std::vector<std::string> texts = {"hello", "world", "low hell"};
  const NGramModel m = fit_ngram_on_texts(texts, vocab, 3, 1.0);
  save_ngram(m, vocab, dir / "lm.bin");
  const LoadedNGram loaded = load_ngram(dir / "lm.bin");
  CHECK(loaded.model == m);
  CHECK(loaded.vocab == vocab);
  CHECK(lm_log_prob_text(loaded.model, "hello", vocab) ==
        lm_log_prob_text(m, "hello", vocab));

  std::string bytes = testing::slurp(dir / "lm.bin");
  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "bad.bin", std::ios::binary) << bad;
    CHECK_THROWS_AS(load_ngram(dir / "bad.bin"), FormatVersionError);
  }
  {
    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(load_ngram(dir / "short.bin"), TruncatedFileError);
  }
}
