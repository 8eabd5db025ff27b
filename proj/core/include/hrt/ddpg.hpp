#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrt/mlp.hpp"
#include "hrt/optim.hpp"
#include "hrt/rng.hpp"

namespace hrt {

struct DdpgConfig {
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double tau = 0.005;
  double gamma = 0.99;
  int batch_size = 256;
  std::size_t buffer_capacity = 200'000;
  double noise_sigma = 0.2;   // initial exploration stddev (action units)
  double noise_decay = 0.1;   // terminal fraction of noise_sigma at progress 1
  int update_every = 1;       // environment steps between gradient updates
  double max_grad_norm = 0.5;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;  // continuous, pre-discretization
  double reward = 0;
  std::vector<double> next_obs;
  std::uint8_t done = 0;
};

// Fixed-capacity ring with uniform sampling from its own seeded stream.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }

  const Transition& at(std::size_t i) const { return storage_[i]; }

  // batch_size indices drawn uniformly over occupied slots.
  std::vector<std::size_t> sample_indices(int batch_size);

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  const std::vector<Transition>& storage() const { return storage_; }
  std::size_t next_slot() const { return next_; }
  void restore(std::vector<Transition> storage, std::size_t next, Rng rng);

 private:
  std::size_t capacity_ = 0;
  std::size_t next_ = 0;
  std::vector<Transition> storage_;
  Rng rng_;
};

struct DdpgUpdateStats {
  double critic_loss = 0;
  double actor_objective = 0;  // mean Q(s, mu(s)) before the update
};

// DDPG trade-sizing agent. In magnitude mode (the LLC) the actor's tanh
// output maps to [0, 1] per-stock magnitudes and direction comes from the
// HLC directive inside the observation. In signed mode (standalone baseline)
// the raw [-1, 1] output is the action and its sign picks the direction.
enum class ActionMode : std::uint8_t { magnitude01 = 0, signed_range = 1 };

class DdpgAgent {
 public:
  DdpgAgent(int obs_size, int n_stocks, ActionMode mode, DdpgConfig cfg, std::uint64_t seed);

  int obs_size() const { return obs_size_; }
  int n_stocks() const { return n_stocks_; }
  ActionMode mode() const { return mode_; }
  const DdpgConfig& config() const { return cfg_; }

  // Noise-free action (env units: [0,1] magnitudes or [-1,1] signed).
  std::vector<double> act_greedy(std::span<const double> obs) const;
  // Exploration action: Gaussian noise added to the tanh output, clamped to
  // [-1, 1], then mapped to env units.
  std::vector<double> act(std::span<const double> obs, double noise_sigma, Rng& rng) const;

  // Linear decay from noise_sigma to noise_decay * noise_sigma over [0, 1].
  double noise_at(double progress) const;

  // y_i = r_i + gamma * (1 - done_i) * Q'(s', mu'(s')).
  std::vector<double> td_target(std::span<const Transition* const> batch) const;

  // One gradient update from a sampled minibatch; soft-updates the targets.
  DdpgUpdateStats update(ReplayBuffer& buffer);

  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  Mlp& actor_target() { return actor_target_; }
  Mlp& critic_target() { return critic_target_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic_target() const { return critic_target_; }
  AdamW& actor_optimizer() { return actor_opt_; }
  AdamW& critic_optimizer() { return critic_opt_; }
  const AdamW& actor_optimizer() const { return actor_opt_; }
  const AdamW& critic_optimizer() const { return critic_opt_; }

 private:
  double to_env_units(double tanh_out) const {
    return mode_ == ActionMode::magnitude01 ? 0.5 * (tanh_out + 1.0) : tanh_out;
  }

  int obs_size_;
  int n_stocks_;
  ActionMode mode_;
  DdpgConfig cfg_;
  Mlp actor_;
  Mlp critic_;
  Mlp actor_target_;
  Mlp critic_target_;
  AdamW actor_opt_;
  AdamW critic_opt_;
};

}  // namespace hrt
