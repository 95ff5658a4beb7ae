#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "quill/vocab.hpp"

namespace quill {

// Counts for one history: c(h, w) per next token and c(h) = sum_w c(h, w).
struct HistoryCounts {
  std::uint64_t total = 0;
  std::map<TokenId, std::uint64_t> next;

  friend bool operator==(const HistoryCounts&, const HistoryCounts&) = default;
};

// Token-level n-gram model with recursive interpolated smoothing
//
//   p_m(w | h) = (c(h, w) + k * p_{m-1}(w | h')) / (c(h) + k),  p_0(w) = 1 / K
//
// where h holds the m-1 preceding tokens and h' drops the oldest of them.
// Every p_m sums to one over the K ids.
class NGramModel {
 public:
  NGramModel(int order, double k, int vocab_size, TokenId bos = Vocab::kBos);

  int order() const { return order_; }
  double smoothing() const { return k_; }
  int vocab_size() const { return vocab_size_; }
  TokenId bos() const { return bos_; }

  // Counts every position at index >= order-1 of a padded sequence.
  void add_sequence(std::span<const TokenId> padded);

  // Table for histories of length m-1 (m in 1..order).
  const std::map<TokenSeq, HistoryCounts>& counts(int m) const { return tables_[m - 1]; }
  std::map<TokenSeq, HistoryCounts>& mutable_counts(int m) { return tables_[m - 1]; }

  // Natural-log probability of `token` after `history`. Histories shorter
  // than order-1 are implicitly left-padded with BOS.
  double log_prob_token(TokenId token, std::span<const TokenId> history) const;
  double prob_token(TokenId token, std::span<const TokenId> history) const;

  // Sum of log_prob_token over every position of `seq` (unpadded, ending
  // with EOS); the history of position i is seq[0..i).
  double log_prob_seq(std::span<const TokenId> seq) const;

  friend bool operator==(const NGramModel&, const NGramModel&) = default;

 private:
  int order_;
  double k_;
  int vocab_size_;
  TokenId bos_;
  std::vector<std::map<TokenSeq, HistoryCounts>> tables_;
};

// Left-pads `content` with order-1 BOS tokens and appends EOS.
TokenSeq lm_padded(std::span<const TokenId> content, int order, TokenId bos = Vocab::kBos,
                   TokenId eos = Vocab::kEos);

// `sequences` must already be padded (see lm_padded).
NGramModel fit_ngram(std::span<const TokenSeq> sequences, int order, double k, int vocab_size,
                     TokenId bos = Vocab::kBos);

// Fits on teacher texts: each is encoded, padded and counted.
NGramModel fit_ngram_on_texts(std::span<const std::string> texts, const Vocab& vocab, int order,
                              double k);

// Log-probability of a full target text (characters + EOS).
double lm_log_prob_text(const NGramModel& model, std::string_view text, const Vocab& vocab);

// Binary format: "NGLM", u32 version, u32 order, f64 k, u32 K, i32 bos,
// then the vocabulary characters, then the count tables of orders 1..n.
// All integers little-endian.
void save_ngram(const NGramModel& model, const Vocab& vocab, const std::filesystem::path& path);

struct LoadedNGram {
  NGramModel model;
  Vocab vocab;
};
LoadedNGram load_ngram(const std::filesystem::path& path);

inline constexpr std::uint32_t kNGramFormatVersion = 1;

}  // namespace quill
