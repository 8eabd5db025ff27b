#include "hrt/optim.hpp"

#include <cmath>

#include "hrt/error.hpp"

namespace hrt {

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw Error(Errc::shape_mismatch, "optimizer state does not match parameter count");
  for (double g : grad)
    if (!std::isfinite(g)) throw Error(Errc::non_finite_gradient, "gradient contains a non-finite value");

  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / bias1;
    const double v_hat = v_[i] / bias2;
    params[i] -= cfg_.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * params[i]);
  }
}

void AdamW::restore(std::vector<double> m, std::vector<double> v, std::int64_t t) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw Error(Errc::shape_mismatch, "restored optimizer state has wrong length");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace hrt
