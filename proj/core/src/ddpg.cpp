#include "hrt/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include "hrt/error.hpp"

namespace hrt {

void DdpgConfig::validate() const {
  if (!(actor_lr > 0) || !(critic_lr > 0)) throw Error(Errc::invalid_spec, "ddpg learning rates must be > 0");
  if (!(tau > 0 && tau <= 1)) throw Error(Errc::invalid_spec, "tau must be in (0, 1]");
  if (!(gamma > 0 && gamma <= 1)) throw Error(Errc::invalid_spec, "gamma must be in (0, 1]");
  if (batch_size < 1) throw Error(Errc::invalid_spec, "batch_size must be >= 1");
  if (buffer_capacity < 1) throw Error(Errc::invalid_spec, "buffer_capacity must be >= 1");
  if (!(noise_sigma >= 0)) throw Error(Errc::invalid_spec, "noise_sigma must be >= 0");
  if (!(noise_decay >= 0 && noise_decay <= 1)) throw Error(Errc::invalid_spec, "noise_decay must be in [0, 1]");
  if (update_every < 1) throw Error(Errc::invalid_spec, "update_every must be >= 1");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity < 1) throw Error(Errc::invalid_spec, "buffer capacity must be >= 1");
  storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[next_] = std::move(t);  // oldest evicted first
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int batch_size) {
  if (static_cast<std::size_t>(batch_size) > storage_.size())
    throw Error(Errc::buffer_too_small, "buffer holds " + std::to_string(storage_.size()) + " < batch " +
                                            std::to_string(batch_size));
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng_.uniform_index(storage_.size());
  return idx;
}

void ReplayBuffer::restore(std::vector<Transition> storage, std::size_t next, Rng rng) {
  storage_ = std::move(storage);
  next_ = next;
  rng_ = rng;
}

DdpgAgent::DdpgAgent(int obs_size, int n_stocks, ActionMode mode, DdpgConfig cfg, std::uint64_t seed)
    : obs_size_(obs_size), n_stocks_(n_stocks), mode_(mode), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (obs_size < 1 || n_stocks < 1) throw Error(Errc::invalid_spec, "bad agent dimensions");

  std::vector<int> actor_sizes{obs_size};
  std::vector<Activation> actor_acts;
  for (int h : cfg_.hidden) {
    actor_sizes.push_back(h);
    actor_acts.push_back(Activation::tanh);
  }
  actor_sizes.push_back(n_stocks);
  actor_acts.push_back(Activation::tanh);  // bounded actions

  std::vector<int> critic_sizes{obs_size + n_stocks};
  std::vector<Activation> critic_acts;
  for (int h : cfg_.hidden) {
    critic_sizes.push_back(h);
    critic_acts.push_back(Activation::tanh);
  }
  critic_sizes.push_back(1);
  critic_acts.push_back(Activation::identity);

  actor_ = Mlp(actor_sizes, actor_acts, derive_seed(seed, 3));
  critic_ = Mlp(critic_sizes, critic_acts, derive_seed(seed, 4));
  actor_target_ = actor_;
  critic_target_ = critic_;

  actor_opt_ = AdamW({.learning_rate = cfg_.actor_lr}, actor_.param_count());
  critic_opt_ = AdamW({.learning_rate = cfg_.critic_lr}, critic_.param_count());
}

std::vector<double> DdpgAgent::act_greedy(std::span<const double> obs) const {
  std::vector<double> a = actor_.forward(obs);
  for (double& x : a) x = to_env_units(x);
  return a;
}

std::vector<double> DdpgAgent::act(std::span<const double> obs, double noise_sigma, Rng& rng) const {
  std::vector<double> a = actor_.forward(obs);
  for (double& x : a) {
    x = std::clamp(x + noise_sigma * rng.normal(), -1.0, 1.0);
    x = to_env_units(x);
  }
  return a;
}

double DdpgAgent::noise_at(double progress) const {
  const double p = std::clamp(progress, 0.0, 1.0);
  return cfg_.noise_sigma * (1.0 - (1.0 - cfg_.noise_decay) * p);
}

std::vector<double> DdpgAgent::td_target(std::span<const Transition* const> batch) const {
  std::vector<double> y(batch.size());
  std::vector<double> sa;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& tr = *batch[b];
    if (tr.done) {
      y[b] = tr.reward;
      continue;
    }
    std::vector<double> mu = actor_target_.forward(tr.next_obs);
    sa.assign(tr.next_obs.begin(), tr.next_obs.end());
    for (double m : mu) sa.push_back(to_env_units(m));
    y[b] = tr.reward + cfg_.gamma * critic_target_.forward(sa)[0];
  }
  return y;
}

DdpgUpdateStats DdpgAgent::update(ReplayBuffer& buffer) {
  const std::vector<std::size_t> idx = buffer.sample_indices(cfg_.batch_size);
  std::vector<const Transition*> batch(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &buffer.at(idx[i]);

  const std::vector<double> y = td_target(batch);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double act_scale = mode_ == ActionMode::magnitude01 ? 0.5 : 1.0;  // d env_action / d tanh_out

  DdpgUpdateStats stats;
  std::vector<double> critic_grad(critic_.param_count(), 0.0);
  std::vector<double> actor_grad(actor_.param_count(), 0.0);
  std::vector<double> sa;
  std::vector<double> critic_in_grad, actor_out_grad(n_stocks_);
  Mlp::Tape critic_tape, actor_tape;

  // Critic: descend mean (Q(s,a) - y)^2.
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& tr = *batch[b];
    sa.assign(tr.obs.begin(), tr.obs.end());
    sa.insert(sa.end(), tr.action.begin(), tr.action.end());
    const double q = critic_.forward(sa, critic_tape)[0];
    const double err = q - y[b];
    stats.critic_loss += err * err;
    const double g[1] = {2.0 * err * inv_batch};
    critic_.backward(critic_tape, g, critic_grad);
  }
  stats.critic_loss *= inv_batch;
  if (!std::isfinite(stats.critic_loss)) throw Error(Errc::non_finite_loss, "critic loss diverged");
  clip_global_norm(critic_grad, cfg_.max_grad_norm);
  critic_opt_.step(critic_.params(), critic_grad);

  // Actor: ascend mean Q(s, mu(s)) through the updated critic.
  std::vector<double> scratch(critic_.param_count());  // critic weight grads, discarded
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& tr = *batch[b];
    std::span<const double> mu = actor_.forward(tr.obs, actor_tape);
    sa.assign(tr.obs.begin(), tr.obs.end());
    for (double m : mu) sa.push_back(to_env_units(m));
    const double q = critic_.forward(sa, critic_tape)[0];
    stats.actor_objective += q;

    const double g[1] = {1.0};
    critic_.backward(critic_tape, g, scratch, &critic_in_grad);
    for (int i = 0; i < n_stocks_; ++i)
      actor_out_grad[i] = -inv_batch * act_scale * critic_in_grad[obs_size_ + i];
    actor_.backward(actor_tape, actor_out_grad, actor_grad);
  }
  stats.actor_objective *= inv_batch;
  if (!std::isfinite(stats.actor_objective)) throw Error(Errc::non_finite_loss, "actor objective diverged");
  clip_global_norm(actor_grad, cfg_.max_grad_norm);
  actor_opt_.step(actor_.params(), actor_grad);

  soft_update(critic_target_, critic_, cfg_.tau);
  soft_update(actor_target_, actor_, cfg_.tau);
  return stats;
}

}  // namespace hrt
