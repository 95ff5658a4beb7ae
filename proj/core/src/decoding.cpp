#include "quill/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "quill/error.hpp"
#include "quill/loss.hpp"

namespace quill {

namespace {

class ModelSession final : public DecodeSession {
 public:
  ModelSession(const ModelParams<float>& params, std::span<const TokenId> source)
      : decoder_(params, source) {}

  std::vector<double> next_logits(TokenId token) override {
    const RowVector<float> row = decoder_.step(token);
    return std::vector<double>(row.data(), row.data() + row.size());
  }

 private:
  IncrementalDecoder<float> decoder_;
};

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("temperature must be a positive finite number");
  }
}

int resolve_limit(int max_len, std::size_t source_len, int model_limit) {
  if (max_len <= 0) return default_decode_limit(source_len, model_limit);
  if (max_len > model_limit) {
    throw InvalidArgument("max_len " + std::to_string(max_len) + " exceeds the model limit " +
                          std::to_string(model_limit));
  }
  return max_len;
}

}  // namespace

Logits<double> Translator::teacher_forced_logits(std::span<const TokenId> source,
                                                 std::span<const TokenId> decoder_input) const {
  auto session = start(source);
  Logits<double> out(static_cast<Eigen::Index>(decoder_input.size()), vocab_size());
  for (std::size_t i = 0; i < decoder_input.size(); ++i) {
    const std::vector<double> row = session->next_logits(decoder_input[i]);
    for (int k = 0; k < vocab_size(); ++k) out(static_cast<Eigen::Index>(i), k) = row[k];
  }
  return out;
}

std::unique_ptr<DecodeSession> ModelTranslator::start(std::span<const TokenId> source) const {
  return std::make_unique<ModelSession>(*params_, source);
}

Logits<double> ModelTranslator::teacher_forced_logits(
    std::span<const TokenId> source, std::span<const TokenId> decoder_input) const {
  return forward<float>(*params_, source, decoder_input, Mode::kEval).cast<double>();
}

int default_decode_limit(std::size_t source_len, int model_limit) {
  const std::size_t limit = 2 * source_len + 16;
  return static_cast<int>(std::min<std::size_t>(limit, static_cast<std::size_t>(model_limit)));
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z / temperature);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z / temperature - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - lse;
  return out;
}

TranslationResult greedy_decode(const Translator& model, std::span<const TokenId> source,
                                double temperature, int max_len) {
  check_temperature(temperature);
  const int limit = resolve_limit(max_len, source.size(), model.max_target_len());
  auto session = model.start(source);
  TranslationResult result;
  TokenId previous = Vocab::kBos;
  for (int step = 0; step < limit; ++step) {
    const std::vector<double> logits = session->next_logits(previous);
    const auto token = static_cast<TokenId>(argmax(logits));
    result.tokens.push_back(token);
    result.token_log_probs.push_back(log_softmax(logits, temperature)[static_cast<std::size_t>(token)]);
    if (token == Vocab::kEos) break;
    previous = token;
  }
  result.confidence = confidence(result.token_log_probs);
  return result;
}

TranslationResult ensemble_decode(std::span<const Translator* const> members,
                                  std::span<const TokenId> source, double temperature,
                                  int max_len) {
  check_temperature(temperature);
  if (members.empty()) throw InvalidArgument("ensemble needs at least one member");
  if (members.size() == 1) return greedy_decode(*members.front(), source, temperature, max_len);
  const int vocab = members.front()->vocab_size();
  int model_limit = members.front()->max_target_len();
  for (const Translator* m : members) {
    if (m->vocab_size() != vocab) {
      throw InvalidArgument("ensemble members disagree on vocabulary size");
    }
    model_limit = std::min(model_limit, m->max_target_len());
  }
  const int limit = resolve_limit(max_len, source.size(), model_limit);
  std::vector<std::unique_ptr<DecodeSession>> sessions;
  for (const Translator* m : members) sessions.push_back(m->start(source));

  const double log_members = std::log(static_cast<double>(members.size()));
  TranslationResult result;
  TokenId previous = Vocab::kBos;
  std::vector<double> mixture(static_cast<std::size_t>(vocab));
  for (int step = 0; step < limit; ++step) {
    std::fill(mixture.begin(), mixture.end(), -std::numeric_limits<double>::infinity());
    for (auto& session : sessions) {
      const std::vector<double> logp = log_softmax(session->next_logits(previous), temperature);
      for (std::size_t k = 0; k < mixture.size(); ++k) mixture[k] = log_add_exp(mixture[k], logp[k]);
    }
    for (double& v : mixture) v -= log_members;
    const auto token = static_cast<TokenId>(argmax(mixture));
    result.tokens.push_back(token);
    result.token_log_probs.push_back(mixture[static_cast<std::size_t>(token)]);
    if (token == Vocab::kEos) break;
    previous = token;
  }
  result.confidence = confidence(result.token_log_probs);
  return result;
}

TranslationResult ensemble_decode(std::span<const ModelParams<float>> members,
                                  std::span<const TokenId> source, double temperature,
                                  int max_len) {
  if (members.empty()) throw InvalidArgument("ensemble needs at least one member");
  for (const auto& m : members) {
    if (!(m.config == members.front().config)) {
      throw InvalidArgument("ensemble members have different model configs");
    }
  }
  std::vector<ModelTranslator> translators;
  translators.reserve(members.size());
  for (const auto& m : members) translators.emplace_back(m);
  std::vector<const Translator*> pointers;
  for (const auto& t : translators) pointers.push_back(&t);
  return ensemble_decode(std::span<const Translator* const>(pointers), source, temperature, max_len);
}

double confidence(std::span<const double> token_log_probs) {
  if (token_log_probs.empty()) throw InvalidArgument("confidence of an empty translation");
  return std::accumulate(token_log_probs.begin(), token_log_probs.end(), 0.0) /
         static_cast<double>(token_log_probs.size());
}

TranslationResult translate(const Translator& model, const Vocab& vocab, std::string_view student,
                            double temperature, int max_len) {
  const TokenSeq source = encoder_input(student, vocab);
  TranslationResult result = greedy_decode(model, source, temperature, max_len);
  result.text = decode(result.tokens, vocab);
  return result;
}

TranslationResult translate_ensemble(std::span<const Translator* const> members,
                                     const Vocab& vocab, std::string_view student,
                                     double temperature, int max_len) {
  const TokenSeq source = encoder_input(student, vocab);
  TranslationResult result = ensemble_decode(members, source, temperature, max_len);
  result.text = decode(result.tokens, vocab);
  return result;
}

std::string identity_translate(std::string_view student) { return std::string(student); }

}  // namespace quill
