#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "quill/model.hpp"
#include "quill/ngram.hpp"
#include "quill/pairs.hpp"
#include "quill/vocab.hpp"

namespace quill {

enum class LossKind { kSmoothedCe, kRobust };

std::string to_string(LossKind kind);
// Accepts "smoothed_ce" and "robust".
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
  LossKind loss = LossKind::kSmoothedCe;
  double epsilon = 0.1;   // label smoothing
  double alpha = 0.25;    // prior probability of a noisy pair (robust loss)
  // Robust loss only: alpha is held at 0 (plain NLL) for this many epochs.
  // A fresh model gives every target a far lower likelihood than the LM, so
  // the clean-pair responsibility, and with it the whole gradient, starts
  // out vanishingly small.
  int robust_warmup_epochs = 3;
  std::string lm_path;    // informational; the fitted model is passed to train()
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double dropout_rate = 0.1;
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-sequence loss over the epoch
  double val_median_ned = 0.0;
  double val_mean_ned = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;

  // "epoch,train_loss,val_median_ned,val_mean_ned" with one row per epoch.
  std::string to_csv() const;
};

struct TrainResult {
  ModelParams<float> params;
  TrainingHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains from a fresh initialization with AdamW on shuffled mini-batches.
// After each epoch the validation set is decoded greedily; the returned
// parameters are those of the epoch with the lowest validation median NED
// (earliest on ties). Training stops after `patience` epochs without
// improvement. The robust loss requires `lm`, whose vocabulary must match.
TrainResult train(std::span<const TextPair> train_pairs, std::span<const TextPair> val_pairs,
                  const Vocab& vocab, ModelConfig model_config, const TrainConfig& config,
                  const NGramModel* lm = nullptr, const EpochCallback& on_epoch = {});

// Greedy-decodes every pair's student text and returns the NED against
// its teacher, in input order.
std::vector<double> decode_neds(const ModelParams<float>& params, const Vocab& vocab,
                                std::span<const TextPair> pairs);

}  // namespace quill
