#include "quill/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "quill/decoding.hpp"
#include "quill/error.hpp"
#include "quill/loss.hpp"
#include "quill/metrics.hpp"
#include "quill/optim.hpp"

namespace quill {

std::string to_string(LossKind kind) {
  return kind == LossKind::kRobust ? "robust" : "smoothed_ce";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "smoothed_ce") return LossKind::kSmoothedCe;
  if (name == "robust") return LossKind::kRobust;
  throw InvalidArgument("unknown loss \"" + name + "\" (expected smoothed_ce or robust)");
}

void TrainConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("train: epsilon must be in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("train: alpha must be in [0, 1]");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train: weight decay must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("train: dropout rate must be in [0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("train: batch size must be >= 1");
  if (robust_warmup_epochs < 0) throw InvalidArgument("train: robust warm-up epochs must be >= 0");
  if (max_epochs < 1) throw InvalidArgument("train: max epochs must be >= 1");
  if (patience < 1) throw InvalidArgument("train: patience must be >= 1");
}

std::string TrainingHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_median_ned,val_mean_ned\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_median_ned << ',' << e.val_mean_ned
        << '\n';
  }
  return out.str();
}

namespace {

void zero_grads(ModelParams<float>& grads) {
  for (auto& t : tensors(grads)) std::fill(t.values().begin(), t.values().end(), 0.0f);
}

void check_finite(const ModelParams<float>& grads) {
  for (const auto& t : tensors(grads)) {
    for (float v : t.values()) {
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient in tensor " + t.name);
    }
  }
}

}  // namespace

std::vector<double> decode_neds(const ModelParams<float>& params, const Vocab& vocab,
                                std::span<const TextPair> pairs) {
  const ModelTranslator model(params);
  std::vector<double> neds;
  neds.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const TranslationResult t = translate(model, vocab, pair.student);
    neds.push_back(normalized_ed(pair.teacher, t.text));
  }
  return neds;
}

TrainResult train(std::span<const TextPair> train_pairs, std::span<const TextPair> val_pairs,
                  const Vocab& vocab, ModelConfig model_config, const TrainConfig& config,
                  const NGramModel* lm, const EpochCallback& on_epoch) {
  config.validate();
  if (train_pairs.empty()) throw InvalidArgument("train: no training pairs");
  if (val_pairs.empty()) throw InvalidArgument("train: no validation pairs");
  const bool robust = config.loss == LossKind::kRobust;
  if (robust && lm == nullptr) throw InvalidArgument("train: robust loss requires a language model");
  if (robust && lm->vocab_size() != vocab.size()) {
    throw InvalidArgument("train: language model vocabulary (" + std::to_string(lm->vocab_size()) +
                          ") does not match the training vocabulary (" +
                          std::to_string(vocab.size()) + ")");
  }
  model_config.vocab_size = vocab.size();
  model_config.dropout_rate = config.dropout_rate;
  model_config.validate();

  std::vector<EncodedPair> data;
  std::vector<double> lm_log_probs;
  data.reserve(train_pairs.size());
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    EncodedPair e = encode_pair(train_pairs[i].student, train_pairs[i].teacher, vocab);
    const auto limit = static_cast<std::size_t>(model_config.max_seq_len);
    if (e.source.size() > limit || e.decoder_input.size() > limit) {
      throw InvalidArgument("train: pair " + std::to_string(i) + " exceeds max_seq_len " +
                            std::to_string(model_config.max_seq_len));
    }
    if (robust) lm_log_probs.push_back(lm->log_prob_seq(e.target));
    data.push_back(std::move(e));
  }

  ModelParams<float> params = init_params<float>(model_config, derive_seed(config.seed, 0));
  ModelParams<float> grads = zero_params<float>(model_config);
  AdamW<float> optimizer(model_config, {config.learning_rate, config.weight_decay});
  Rng order_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));

  TrainResult result{params, {}};
  double best_ned = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TapeHandle<float> tape;
  Logits<float> dlogits;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    const double alpha = epoch <= config.robust_warmup_epochs ? 0.0 : config.alpha;
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      zero_grads(grads);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const EncodedPair& e = data[idx];
        const Logits<float> logits =
            forward(params, e.source, e.decoder_input, Mode::kTrain, &dropout_rng, &tape);
        const LossOutput out =
            robust ? robust_nll(logits, e.target, lm_log_probs[idx], alpha, &dlogits, scale)
                   : smoothed_ce_loss(logits, e.target, config.epsilon, &dlogits, scale);
        if (!std::isfinite(out.loss)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                               " on training pair " + std::to_string(idx));
        }
        epoch_loss += out.loss;
        backward(params, tape, dlogits, grads);
      }
      check_finite(grads);
      optimizer.step(params, grads);
    }

    const std::vector<double> neds = decode_neds(params, vocab, val_pairs);
    const Summary s = summarize(neds);
    const EpochRecord record{epoch, epoch_loss / static_cast<double>(data.size()), s.median, s.mean};
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (s.median < best_ned) {
      best_ned = s.median;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace quill
