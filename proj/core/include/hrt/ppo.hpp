#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hrt/mlp.hpp"
#include "hrt/optim.hpp"
#include "hrt/rng.hpp"
#include "hrt/trading_env.hpp"

namespace hrt {

struct PpoConfig {
  double learning_rate = 3e-4;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;             // passes over the rollout per update
  int minibatch_size = 256;
  int rollout_horizon = 0;    // 0 = one full episode per iteration
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;
  double fr_input_scale = 100.0;  // forward returns arrive in ~1% units
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

// Per-stock 3-way action head: index 0 = buy(+1), 1 = sell(-1), 2 = hold(0).
int directive_from_action_index(int index);
int action_index_from_directive(int directive_entry);

// Samples one action per 3-probability group. Returns the per-group indices;
// joint_log_prob and per_group_log_probs (if non-null) receive the log
// probabilities of the drawn actions.
std::vector<int> sample_from_probs(std::span<const double> probs, Rng& rng, double* joint_log_prob,
                                   std::vector<double>* per_group_log_probs);

// On-policy rollout storage plus the computed targets.
struct Trajectory {
  std::vector<std::vector<double>> inputs;       // policy/value net inputs
  std::vector<std::vector<int>> action_indices;  // per-step, per-stock head index
  std::vector<double> log_probs;                 // joint log pi(a|s) at collection time
  std::vector<std::vector<double>> per_stock_log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  double bootstrap_value = 0;  // value of the state after the last step, 0 if terminal

  std::vector<double> rewards_to_go;  // filled by compute_gae
  std::vector<double> advantages;     // filled by compute_gae, normalized

  std::size_t size() const { return rewards.size(); }
  void clear();
};

// GAE(lambda) advantages, normalized to mean 0 / std 1 over the rollout, and
// rewards-to-go = raw advantage + value.
void compute_gae(Trajectory& traj, const PpoConfig& cfg);

struct PpoUpdateStats {
  double surrogate = 0;       // mean clipped objective (pre-entropy), last epoch
  double value_loss = 0;      // mean squared error, last epoch
  double entropy = 0;         // mean per-step entropy, last epoch
  double max_ratio_used = 1;  // largest ratio that contributed gradient
  double min_ratio_used = 1;
  std::int64_t clip_violations = 0;  // gradient taken from an out-of-range ratio
                                     // while the clipped branch was smaller
};

// PPO-trained direction policy over N stocks: a factorized categorical head
// (3 probabilities per stock) plus a scalar value baseline.
class PpoAgent {
 public:
  PpoAgent(int n_stocks, PpoConfig cfg, std::uint64_t seed);

  int num_stocks() const { return n_stocks_; }
  const PpoConfig& config() const { return cfg_; }

  std::vector<double> net_input(const HlcObservation& obs) const;

  DirectiveVector sample_directive(const HlcObservation& obs, Rng& rng, double* joint_log_prob = nullptr,
                                   std::vector<double>* per_stock_log_probs = nullptr) const;
  DirectiveVector greedy_directive(const HlcObservation& obs) const;
  double state_value(const HlcObservation& obs) const;

  // One PPO update over the trajectory (advantages must be computed).
  // Shuffling consumes draws from rng; throws NonFiniteLoss on a bad batch.
  PpoUpdateStats update(const Trajectory& traj, Rng& rng);

  Mlp& policy() { return policy_; }
  const Mlp& policy() const { return policy_; }
  Mlp& value() { return value_; }
  const Mlp& value() const { return value_; }
  AdamW& policy_optimizer() { return policy_opt_; }
  AdamW& value_optimizer() { return value_opt_; }
  const AdamW& policy_optimizer() const { return policy_opt_; }
  const AdamW& value_optimizer() const { return value_opt_; }

 private:
  int n_stocks_;
  PpoConfig cfg_;
  Mlp policy_;
  Mlp value_;
  AdamW policy_opt_;
  AdamW value_opt_;
};

// Fraction of non-hold greedy actions whose sign matches the realized forward
// return, zero-return days excluded. Empty when the policy never trades.
std::optional<double> hlc_accuracy(const PpoAgent& agent, const MarketFrame& frame, const SignalPanel& signals);

}  // namespace hrt
