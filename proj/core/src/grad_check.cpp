#include "quill/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "quill/error.hpp"
#include "quill/loss.hpp"

namespace quill {

ModelConfig micro_config() {
  ModelConfig c;
  c.vocab_size = 9;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.d_ffn = 16;
  c.max_seq_len = 10;
  c.dropout_rate = 0.0;
  return c;
}

MicroBatch random_micro_batch(const ModelConfig& config, int batch_size, std::uint64_t seed) {
  Rng rng(seed);
  MicroBatch batch;
  const auto content_id = [&]() {
    return static_cast<TokenId>(Vocab::kNumSpecials +
                                rng.below(static_cast<std::uint64_t>(config.vocab_size - Vocab::kNumSpecials)));
  };
  const auto max_len = static_cast<std::uint64_t>(config.max_seq_len - 1);
  for (int b = 0; b < batch_size; ++b) {
    EncodedPair p;
    const std::size_t src_len = 1 + rng.below(max_len);
    const std::size_t tgt_len = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < src_len; ++i) p.source.push_back(content_id());
    p.source.push_back(Vocab::kEos);
    p.decoder_input.push_back(Vocab::kBos);
    for (std::size_t i = 0; i < tgt_len; ++i) {
      const TokenId t = content_id();
      p.decoder_input.push_back(t);
      p.target.push_back(t);
    }
    p.target.push_back(Vocab::kEos);
    // Roughly the scale of a character model's sequence log-probability.
    batch.lm_log_probs.push_back(-rng.uniform(1.0, 2.0) * static_cast<double>(p.target.size()));
    batch.pairs.push_back(std::move(p));
  }
  return batch;
}

double batch_loss(const ModelParams<double>& params, const MicroBatch& batch,
                  const GradCheckOptions& options, ModelParams<double>* grads) {
  const double scale = 1.0 / static_cast<double>(batch.pairs.size());
  double total = 0.0;
  TapeHandle<double> tape;
  Logits<double> dlogits;
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    const EncodedPair& p = batch.pairs[i];
    const Logits<double> logits = forward(params, p.source, p.decoder_input, Mode::kEval, nullptr,
                                          grads != nullptr ? &tape : nullptr);
    Logits<double>* g = grads != nullptr ? &dlogits : nullptr;
    const LossOutput out =
        options.loss == LossKind::kRobust
            ? robust_nll(logits, p.target, batch.lm_log_probs[i], options.alpha, g, scale)
            : smoothed_ce_loss(logits, p.target, options.epsilon, g, scale);
    total += out.loss;
    if (grads != nullptr) backward(params, tape, dlogits, *grads);
  }
  return total * scale;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(ModelConfig config, const GradCheckOptions& options) {
  config.dropout_rate = 0.0;
  config.validate();
  if (options.samples < 1) throw InvalidArgument("grad check needs at least one sample");

  ModelParams<double> params = init_params<double>(config, options.seed);
  // Move away from the symmetric initial point (zero biases, unit scales).
  Rng jitter(derive_seed(options.seed, 1));
  for (auto& t : tensors(params)) {
    for (double& v : t.values()) v += jitter.uniform(-0.1, 0.1);
  }
  const MicroBatch batch = random_micro_batch(config, options.batch_size, derive_seed(options.seed, 2));

  ModelParams<double> grads = zero_params<double>(config);
  batch_loss(params, batch, options, &grads);

  auto param_list = tensors(params);
  const auto grad_list = tensors(grads);
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  Rng pick_rng(derive_seed(options.seed, 3));
  for (std::size_t t = 0; t < param_list.size(); ++t) {
    picks.emplace_back(t, pick_rng.below(static_cast<std::uint64_t>(param_list[t].size())));
  }
  std::size_t total = 0;
  for (const auto& t : param_list) total += static_cast<std::size_t>(t.size());
  while (picks.size() < static_cast<std::size_t>(options.samples)) {
    std::size_t flat = pick_rng.below(total);
    std::size_t t = 0;
    while (flat >= static_cast<std::size_t>(param_list[t].size())) {
      flat -= static_cast<std::size_t>(param_list[t].size());
      ++t;
    }
    picks.emplace_back(t, flat);
  }

  GradCheckReport report;
  for (const auto& [t, idx] : picks) {
    double& value = param_list[t].data[idx];
    const double original = value;
    value = original + options.step;
    const double up = batch_loss(params, batch, options, nullptr);
    value = original - options.step;
    const double down = batch_loss(params, batch, options, nullptr);
    value = original;
    GradCheckEntry entry;
    entry.tensor = param_list[t].name;
    entry.index = idx;
    entry.analytic = grad_list[t].data[idx];
    entry.numeric = (up - down) / (2.0 * options.step);
    entry.rel_error = relative_error(entry.analytic, entry.numeric);
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    if (!(entry.rel_error < options.tolerance)) report.violations.push_back(entry);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace quill
