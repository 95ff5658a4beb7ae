#include "quill/loss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "quill/error.hpp"

namespace quill {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <typename S>
void check_alignment(const Logits<S>& logits, std::span<const TokenId> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw InvalidArgument("loss: " + std::to_string(logits.rows()) + " logit rows for " +
                          std::to_string(targets.size()) + " targets");
  }
  for (TokenId t : targets) {
    if (t < 0 || t >= logits.cols()) throw InvalidArgument("loss: target id outside vocabulary");
  }
}

// Log-softmax of one row, computed in double.
template <typename S>
void log_softmax_row(const Logits<S>& logits, Eigen::Index row, std::vector<double>& out) {
  const Eigen::Index k = logits.cols();
  out.resize(static_cast<std::size_t>(k));
  double mx = kNegInf;
  for (Eigen::Index j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(logits(row, j)));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) sum += std::exp(static_cast<double>(logits(row, j)) - mx);
  const double lse = mx + std::log(sum);
  for (Eigen::Index j = 0; j < k; ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<double>(logits(row, j)) - lse;
  }
}

}  // namespace

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(std::min(a, b) - mx));
}

template <typename S>
LossOutput smoothed_ce_loss(const Logits<S>& logits, std::span<const TokenId> targets,
                            double epsilon, Logits<S>* grad, double grad_scale) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument("label smoothing epsilon must be in [0, 1]");
  }
  check_alignment(logits, targets);
  const Eigen::Index k = logits.cols();
  const double uniform = epsilon / static_cast<double>(k);
  if (grad != nullptr) grad->resize(logits.rows(), k);

  LossOutput out;
  std::vector<double> logp;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    log_softmax_row(logits, i, logp);
    const auto y = static_cast<std::size_t>(targets[static_cast<std::size_t>(i)]);
    double sum_logp = 0.0;
    for (double v : logp) sum_logp += v;
    out.loss -= (1.0 - epsilon) * logp[y] + uniform * sum_logp;
    out.token_log_probs.push_back(logp[y]);
    if (grad != nullptr) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double target = (static_cast<std::size_t>(j) == y ? 1.0 - epsilon : 0.0) + uniform;
        (*grad)(i, j) = static_cast<S>(grad_scale * (std::exp(logp[static_cast<std::size_t>(j)]) - target));
      }
    }
  }
  return out;
}

template <typename S>
LossOutput robust_nll(const Logits<S>& logits, std::span<const TokenId> targets,
                      double lm_log_prob, double alpha, Logits<S>* grad, double grad_scale) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("robust alpha must be in [0, 1]");
  check_alignment(logits, targets);
  if (alpha == 1.0 && lm_log_prob == kNegInf) {
    throw InvalidArgument("robust likelihood is degenerate: alpha = 1 and log p_lm = -inf");
  }
  if (std::isnan(lm_log_prob) || lm_log_prob > 0.0) {
    throw InvalidArgument("robust likelihood needs log p_lm <= 0");
  }
  const Eigen::Index k = logits.cols();

  LossOutput out;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(logits.rows()));
  double model_ll = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto& logp = rows[static_cast<std::size_t>(i)];
    log_softmax_row(logits, i, logp);
    const double lp = logp[static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])];
    model_ll += lp;
    out.token_log_probs.push_back(lp);
  }
  const double model_term = alpha < 1.0 ? std::log1p(-alpha) + model_ll : kNegInf;
  const double lm_term = alpha > 0.0 ? std::log(alpha) + lm_log_prob : kNegInf;
  const double log_mix = log_add_exp(model_term, lm_term);
  out.loss = -log_mix;
  const double w = model_term == kNegInf ? 0.0 : std::exp(model_term - log_mix);
  out.responsibility = w;

  if (grad != nullptr) {
    grad->resize(logits.rows(), k);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const auto& logp = rows[static_cast<std::size_t>(i)];
      const auto y = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < k; ++j) {
        const double g = std::exp(logp[static_cast<std::size_t>(j)]) - (j == y ? 1.0 : 0.0);
        (*grad)(i, j) = static_cast<S>(grad_scale * w * g);
      }
    }
  }
  return out;
}

template LossOutput smoothed_ce_loss<float>(const Logits<float>&, std::span<const TokenId>, double,
                                            Logits<float>*, double);
template LossOutput smoothed_ce_loss<double>(const Logits<double>&, std::span<const TokenId>,
                                             double, Logits<double>*, double);
template LossOutput robust_nll<float>(const Logits<float>&, std::span<const TokenId>, double,
                                      double, Logits<float>*, double);
template LossOutput robust_nll<double>(const Logits<double>&, std::span<const TokenId>, double,
                                       double, Logits<double>*, double);

}  // namespace quill
