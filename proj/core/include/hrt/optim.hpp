#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hrt {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
class AdamW {
 public:
  AdamW() = default;
  AdamW(AdamWConfig cfg, std::size_t param_count)
      : cfg_(cfg), m_(param_count, 0.0), v_(param_count, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad);

  const AdamWConfig& config() const { return cfg_; }
  std::int64_t steps_taken() const { return t_; }

  // checkpoint access
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, std::int64_t t);

 private:
  AdamWConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

// Scales grad so its l2 norm is at most max_norm; returns the pre-clip norm.
double clip_global_norm(std::span<double> grad, double max_norm);

}  // namespace hrt
