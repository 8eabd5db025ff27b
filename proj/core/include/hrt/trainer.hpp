#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "hrt/backtest.hpp"
#include "hrt/ddpg.hpp"
#include "hrt/ppo.hpp"
#include "hrt/trading_env.hpp"

namespace hrt {

struct TrainSchedule {
  int hlc_episodes = 50;          // phase 1
  int llc_episodes = 50;          // phase 2 (and the ddpg_only budget)
  int phase3_block = 1;           // episodes per controller per alternation
  double switch_growth = 2.0;     // block length multiplier per alternation pair
  int max_phase3_episodes = 100;
  int convergence_window = 20;
  double convergence_tol = 1e-3;
  std::int64_t total_timesteps = 500'000;  // global environment-step budget
  double alpha0 = 1.0;
  double lambda = 0.001;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // extra checkpoints every K global episodes (0 = off)

  void validate() const;
};

// One line of the per-episode training log (also written as JSON lines).
struct EpisodeLog {
  int phase = 0;
  int global_episode = 0;
  std::string controller;  // "hlc" or "llc"
  double alpha = 1.0;
  double align_sum = 0;        // sum of per-stock alignment rewards over the episode
  double llc_return = 0;       // sum of scaled LLC rewards over the episode
  double hlc_reward_sum = 0;   // alpha * align_sum + (1 - alpha) * llc_return
  double mean_align_reward = 0;
  double surrogate = 0;
  double value_loss = 0;
  double entropy = 0;
  double critic_loss = 0;
  double actor_objective = 0;
  double noise_sigma = 0;
  double buffer_fill = 0;
  std::int64_t timesteps = 0;  // global counter after the episode
};

// Serialized training state. Covers everything a bit-identical resume needs:
// the six networks (targets included), optimizer moments, the replay buffer,
// every RNG stream, and the schedule position.
struct HrtCheckpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string strategy;  // "hrt" or "ddpg_only"
  int n_stocks = 0;
  int n_days = 0;

  EnvConfig env_cfg;
  PpoConfig ppo_cfg;
  DdpgConfig ddpg_cfg;
  TrainSchedule schedule;

  // schedule position
  int phase = 1;  // 1..3 while training, 4 when finished
  int phase1_done = 0;
  int phase2_done = 0;
  int p3_done = 0;
  int p3_in_block = 0;
  int p3_pair = 0;
  bool p3_hlc_turn = true;
  bool p3_converged = false;
  int global_episode = 0;
  std::int64_t timesteps = 0;
  int llc_episodes_trained = 0;
  std::vector<double> recent_returns;  // convergence window contents

  Mlp policy, value, actor, critic, actor_target, critic_target;
  struct OptState {
    std::vector<double> m, v;
    std::int64_t t = 0;
  };
  OptState policy_opt, value_opt, actor_opt, critic_opt;

  std::string rng_ppo, rng_ddpg;

  std::size_t buffer_capacity = 0;
  std::size_t buffer_next = 0;
  std::string buffer_rng;
  std::vector<Transition> buffer_storage;
};

// CRC-protected binary serialization. Corrupt payloads raise ChecksumError,
// unknown versions VersionError.
void save_checkpoint(const HrtCheckpoint& ckpt, const std::string& path);
HrtCheckpoint load_checkpoint(const std::string& path);

// Rebuild inference agents from a checkpoint (for backtests).
PpoAgent make_ppo_agent(const HrtCheckpoint& ckpt);
DdpgAgent make_ddpg_agent(const HrtCheckpoint& ckpt);

// Phased Alternating Training. Phase 1 trains the direction policy on
// alignment rewards alone; phase 2 trains the sizing policy against the
// frozen direction policy; phase 3 alternates controller-specific blocks
// whose length grows by switch_growth per alternation, blending rewards with
// the decaying alpha schedule. The same driver also trains the standalone
// DDPG baseline (strategy = ddpg_only): llc_episodes of signed-action
// training, no phases.
class HrtTrainer {
 public:
  HrtTrainer(const MarketFrame& frame, const SignalPanel& signals, EnvConfig env_cfg, PpoConfig ppo_cfg,
             DdpgConfig ddpg_cfg, TrainSchedule schedule, StrategyKind strategy = StrategyKind::hrt,
             std::string run_dir = "");

  void train();  // runs whatever remains of the schedule
  void train_phase1();
  void train_phase2();
  void train_phase3();

  HrtCheckpoint make_checkpoint() const;
  void restore(const HrtCheckpoint& ckpt);

  const PpoAgent& hlc() const { return hlc_; }
  const DdpgAgent& llc() const { return llc_; }
  PpoAgent& hlc() { return hlc_; }
  DdpgAgent& llc() { return llc_; }
  const std::vector<EpisodeLog>& logs() const { return logs_; }
  std::int64_t timesteps() const { return timesteps_; }
  int global_episode() const { return global_episode_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int phase() const { return phase_; }

 private:
  bool budget_exhausted() const { return timesteps_ >= schedule_.total_timesteps; }
  double alpha_now() const;  // schedule value for the current phase
  void run_hlc_episode(int phase, bool mixed_reward);
  void run_llc_episode(int phase);
  void run_ddpg_only_episode();
  void after_episode(EpisodeLog log);
  void write_log_line(const EpisodeLog& log);
  void maybe_periodic_checkpoint();
  void save_to_run_dir(const std::string& name) const;
  bool convergence_reached() const;

  const MarketFrame* frame_;
  const SignalPanel* signals_;
  EnvConfig env_cfg_;
  PpoConfig ppo_cfg_;
  DdpgConfig ddpg_cfg_;
  TrainSchedule schedule_;
  StrategyKind strategy_;
  std::string run_dir_;

  PpoAgent hlc_;
  DdpgAgent llc_;
  ReplayBuffer buffer_;
  Rng rng_ppo_;
  Rng rng_ddpg_;

  int phase_ = 1;
  int phase1_done_ = 0;
  int phase2_done_ = 0;
  int p3_done_ = 0;
  int p3_in_block_ = 0;
  int p3_pair_ = 0;
  bool p3_hlc_turn_ = true;
  bool p3_converged_ = false;
  int global_episode_ = 0;
  std::int64_t timesteps_ = 0;
  int llc_episodes_trained_ = 0;
  std::deque<double> recent_returns_;

  std::vector<EpisodeLog> logs_;
};

}  // namespace hrt
