#pragma once

#include <cstdint>
#include <span>

#include "quill/model.hpp"

namespace quill {

struct AdamWConfig {
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One AdamW update of a flat block with decoupled weight decay:
//   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + lambda * theta)
// `step` is the 1-based index of this update (used for bias correction).
template <typename S>
void adamw_update(std::span<S> theta, std::span<const S> grad, std::span<S> m, std::span<S> v,
                  std::int64_t step, const AdamWConfig& config);

template <typename S>
class AdamW {
 public:
  AdamW(const ModelConfig& config, AdamWConfig hyper);

  void step(ModelParams<S>& params, const ModelParams<S>& grads);

  std::int64_t steps_taken() const { return step_; }
  const AdamWConfig& hyper() const { return hyper_; }

 private:
  AdamWConfig hyper_;
  ModelParams<S> m_;
  ModelParams<S> v_;
  std::int64_t step_ = 0;
};

}  // namespace quill
