#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quill/model.hpp"
#include "quill/vocab.hpp"

namespace quill {

// Autoregressive state for one source sequence.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;
  // Feeds the next decoder input token and returns the logits for the
  // token that follows it.
  virtual std::vector<double> next_logits(TokenId token) = 0;
};

// Anything that yields p(y_i | x, y_{1:i-1}) as logits. The trained model
// is one implementation; tests supply hand-built ones.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual int vocab_size() const = 0;
  // Upper bound on the number of decoder positions.
  virtual int max_target_len() const = 0;
  virtual std::unique_ptr<DecodeSession> start(std::span<const TokenId> source) const = 0;
  // One row per decoder input position. The default steps a session.
  virtual Logits<double> teacher_forced_logits(std::span<const TokenId> source,
                                               std::span<const TokenId> decoder_input) const;
};

// Wraps trained parameters; `params` must outlive the translator.
class ModelTranslator final : public Translator {
 public:
  explicit ModelTranslator(const ModelParams<float>& params) : params_(&params) {}

  int vocab_size() const override { return params_->config.vocab_size; }
  int max_target_len() const override { return params_->config.max_seq_len; }
  std::unique_ptr<DecodeSession> start(std::span<const TokenId> source) const override;
  Logits<double> teacher_forced_logits(std::span<const TokenId> source,
                                       std::span<const TokenId> decoder_input) const override;

  const ModelParams<float>& params() const { return *params_; }

 private:
  const ModelParams<float>* params_;
};

struct TranslationResult {
  TokenSeq tokens;  // EOS included when emitted
  std::string text;
  std::vector<double> token_log_probs;
  double confidence = 0.0;
};

// Length cap used when no explicit max_len is given: twice the source
// length plus a small margin, bounded by the model's limit.
int default_decode_limit(std::size_t source_len, int model_limit);

// Greedy search: at each step picks the argmax token (smallest id on
// ties). Log-probabilities are taken from softmax(z / temperature);
// the chosen tokens do not depend on the temperature. max_len <= 0 means
// default_decode_limit.
TranslationResult greedy_decode(const Translator& model, std::span<const TokenId> source,
                                double temperature = 1.0, int max_len = 0);

// Greedy search over p = mean_s softmax(z_s / temperature). Throws
// InvalidArgument when the members disagree on vocabulary size.
TranslationResult ensemble_decode(std::span<const Translator* const> members,
                                  std::span<const TokenId> source, double temperature = 1.0,
                                  int max_len = 0);

// Ensemble over parameter sets; every member must share one config.
TranslationResult ensemble_decode(std::span<const ModelParams<float>> members,
                                  std::span<const TokenId> source, double temperature = 1.0,
                                  int max_len = 0);

// Mean token log-probability. Throws InvalidArgument on an empty list.
double confidence(std::span<const double> token_log_probs);

// Encodes `student`, decodes, and fills in the text.
TranslationResult translate(const Translator& model, const Vocab& vocab, std::string_view student,
                            double temperature = 1.0, int max_len = 0);
TranslationResult translate_ensemble(std::span<const Translator* const> members,
                                     const Vocab& vocab, std::string_view student,
                                     double temperature = 1.0, int max_len = 0);

// Baseline that returns the student text unchanged.
std::string identity_translate(std::string_view student);

// log softmax(logits / temperature), in double.
std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

}  // namespace quill
