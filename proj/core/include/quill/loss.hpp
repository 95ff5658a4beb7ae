#pragma once

#include <optional>
#include <span>
#include <vector>

#include "quill/model.hpp"

namespace quill {

struct LossOutput {
  double loss = 0.0;
  // log p(y_i | x, y_{1:i-1}) at each target position (unsmoothed).
  std::vector<double> token_log_probs;
  // Posterior probability that the pair is clean; robust loss only.
  std::optional<double> responsibility;
};

// Label-smoothed cross-entropy summed over target positions:
//   -sum_i sum_k q'(k) log softmax(z_i)_k,  q'(k) = (1-eps) [k = y_i] + eps / K.
// When `grad` is non-null it receives grad_scale * d(loss)/d(logits).
template <typename S>
LossOutput smoothed_ce_loss(const Logits<S>& logits, std::span<const TokenId> targets,
                            double epsilon, Logits<S>* grad = nullptr, double grad_scale = 1.0);

// Negative log of the sequence-level mixture
//   (1 - alpha) p_model(y | x) + alpha p_lm(y)
// evaluated in log space. `lm_log_prob` is log p_lm(y) for the full target
// including EOS. The logit gradient is the plain cross-entropy gradient
// weighted by the responsibility of the model component.
template <typename S>
LossOutput robust_nll(const Logits<S>& logits, std::span<const TokenId> targets,
                      double lm_log_prob, double alpha, Logits<S>* grad = nullptr,
                      double grad_scale = 1.0);

// log(exp(a) + exp(b)) with -inf handled.
double log_add_exp(double a, double b);

}  // namespace quill
