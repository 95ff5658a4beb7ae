#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quill/model.hpp"
#include "quill/trainer.hpp"

namespace quill {

struct GradCheckOptions {
  LossKind loss = LossKind::kSmoothedCe;
  double epsilon = 0.1;
  double alpha = 0.25;
  int samples = 200;
  double step = 1e-5;
  double tolerance = 1e-4;
  int batch_size = 3;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
  std::vector<GradCheckEntry> violations;

  bool passed() const { return violations.empty(); }
};

// Micro architecture used by default: d_model 8, two heads, one encoder and
// one decoder layer, no dropout.
ModelConfig micro_config();

// Random source/target token sequences plus a log p_lm per pair.
struct MicroBatch {
  std::vector<EncodedPair> pairs;
  std::vector<double> lm_log_probs;
};
MicroBatch random_micro_batch(const ModelConfig& config, int batch_size, std::uint64_t seed);

// Mean loss over the batch; accumulates its gradient into `grads` if given.
double batch_loss(const ModelParams<double>& params, const MicroBatch& batch,
                  const GradCheckOptions& options, ModelParams<double>* grads);

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). The floor keeps
// parameters with vanishing gradients from dividing round-off by zero.
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients with central differences in double
// precision on `options.samples` sampled parameters (every tensor covered
// at least once).
GradCheckReport grad_check(ModelConfig config, const GradCheckOptions& options);

}  // namespace quill
