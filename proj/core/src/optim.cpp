#include "quill/optim.hpp"

#include <cmath>

namespace quill {

template <typename S>
void adamw_update(std::span<S> theta, std::span<const S> grad, std::span<S> m, std::span<S> v,
                  std::int64_t step, const AdamWConfig& c) {
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * g;
    const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * g * g;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    const double t = static_cast<double>(theta[i]);
    theta[i] = static_cast<S>(
        t - c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * t));
  }
}

template <typename S>
AdamW<S>::AdamW(const ModelConfig& config, AdamWConfig hyper)
    : hyper_(hyper), m_(zero_params<S>(config)), v_(zero_params<S>(config)) {}

template <typename S>
void AdamW<S>::step(ModelParams<S>& params, const ModelParams<S>& grads) {
  ++step_;
  auto p = tensors(params);
  const auto g = tensors(grads);
  auto m = tensors(m_);
  auto v = tensors(v_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    adamw_update<S>(p[i].values(), g[i].values(), m[i].values(), v[i].values(), step_, hyper_);
  }
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                  std::span<float>, std::int64_t, const AdamWConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   std::span<double>, std::int64_t, const AdamWConfig&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace quill
