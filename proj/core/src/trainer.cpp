#include "hrt/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "hrt/error.hpp"

namespace hrt {

namespace {

int block_length(const TrainSchedule& s, int pair_index) {
  const double len = s.phase3_block * std::pow(s.switch_growth, pair_index);
  return std::max(1, static_cast<int>(std::llround(len)));
}

}  // namespace

void TrainSchedule::validate() const {
  if (hlc_episodes < 1 || llc_episodes < 1 || phase3_block < 1)
    throw Error(Errc::invalid_spec, "episode counts must be >= 1");
  if (!(switch_growth >= 1.0)) throw Error(Errc::invalid_spec, "switch_growth must be >= 1");
  if (max_phase3_episodes < 0) throw Error(Errc::invalid_spec, "max_phase3_episodes must be >= 0");
  if (convergence_window < 1) throw Error(Errc::invalid_spec, "convergence_window must be >= 1");
  if (!(convergence_tol > 0)) throw Error(Errc::invalid_spec, "convergence_tol must be > 0");
  if (total_timesteps < 1) throw Error(Errc::invalid_spec, "total_timesteps must be > 0");
  if (!(alpha0 > 0 && alpha0 <= 1)) throw Error(Errc::invalid_spec, "alpha0 must be in (0, 1]");
  if (!(lambda >= 0)) throw Error(Errc::invalid_spec, "lambda must be >= 0");
  if (checkpoint_every < 0) throw Error(Errc::invalid_spec, "checkpoint_every must be >= 0");
}

HrtTrainer::HrtTrainer(const MarketFrame& frame, const SignalPanel& signals, EnvConfig env_cfg, PpoConfig ppo_cfg,
                       DdpgConfig ddpg_cfg, TrainSchedule schedule, StrategyKind strategy, std::string run_dir)
    : frame_(&frame),
      signals_(&signals),
      env_cfg_(env_cfg),
      ppo_cfg_(std::move(ppo_cfg)),
      ddpg_cfg_(std::move(ddpg_cfg)),
      schedule_(schedule),
      strategy_(strategy),
      run_dir_(std::move(run_dir)),
      hlc_(frame.num_stocks(), ppo_cfg_, derive_seed(schedule.seed, 100)),
      llc_(3 * frame.num_stocks() + 1, frame.num_stocks(),
           strategy == StrategyKind::ddpg_only ? ActionMode::signed_range : ActionMode::magnitude01, ddpg_cfg_,
           derive_seed(schedule.seed, 200)),
      buffer_(ddpg_cfg_.buffer_capacity, derive_seed(schedule.seed, 300)),
      rng_ppo_(derive_seed(schedule.seed, 400)),
      rng_ddpg_(derive_seed(schedule.seed, 500)) {
  env_cfg_.validate();
  schedule_.validate();
  if (strategy != StrategyKind::hrt && strategy != StrategyKind::ddpg_only)
    throw Error(Errc::invalid_spec, "trainable strategies are hrt and ddpg_only");
  if (frame.num_days() < 2) throw Error(Errc::frame_too_short, "need at least 2 trading days");
  if (signals.fr.rows() != frame.num_stocks() || signals.fr.cols() != frame.num_days())
    throw Error(Errc::dimension_mismatch, "signal panel does not match frame");
  if (!run_dir_.empty()) std::filesystem::create_directories(run_dir_);
}

double HrtTrainer::alpha_now() const {
  // alpha decays with the phase-3 episode count and never resets across
  // alternating blocks; earlier phases sit at alpha0.
  if (phase_ < 3) return schedule_.alpha0;
  return alpha_schedule(static_cast<double>(p3_done_), schedule_.alpha0, schedule_.lambda);
}

void HrtTrainer::train() {
  if (strategy_ == StrategyKind::ddpg_only) {
    while (phase2_done_ < schedule_.llc_episodes && !budget_exhausted()) run_ddpg_only_episode();
    if (phase2_done_ >= schedule_.llc_episodes) phase_ = 4;
    save_to_run_dir("checkpoint_final");
    return;
  }

  if (phase_ == 1) {
    train_phase1();
    if (phase1_done_ >= schedule_.hlc_episodes) {
      phase_ = 2;
      save_to_run_dir("checkpoint_phase1");
    }
  }
  if (phase_ == 2) {
    train_phase2();
    if (phase2_done_ >= schedule_.llc_episodes) {
      phase_ = 3;
      save_to_run_dir("checkpoint_phase2");
    }
  }
  if (phase_ == 3) {
    train_phase3();
    const bool budget_done = budget_exhausted();
    if (p3_converged_ || p3_done_ >= schedule_.max_phase3_episodes || budget_done) {
      phase_ = 4;
      save_to_run_dir("checkpoint_final");
    }
  }
}

void HrtTrainer::train_phase1() {
  while (phase1_done_ < schedule_.hlc_episodes && !budget_exhausted()) {
    run_hlc_episode(1, /*mixed_reward=*/false);
    ++phase1_done_;
  }
}

void HrtTrainer::train_phase2() {
  while (phase2_done_ < schedule_.llc_episodes && !budget_exhausted()) {
    run_llc_episode(2);
    ++phase2_done_;
  }
}

void HrtTrainer::train_phase3() {
  phase_ = 3;
  while (!p3_converged_ && p3_done_ < schedule_.max_phase3_episodes && !budget_exhausted()) {
    if (p3_hlc_turn_)
      run_hlc_episode(3, /*mixed_reward=*/true);
    else
      run_llc_episode(3);
    ++p3_done_;
    ++p3_in_block_;
    if (p3_in_block_ >= block_length(schedule_, p3_pair_)) {
      p3_in_block_ = 0;
      if (!p3_hlc_turn_) ++p3_pair_;  // a full HLC+LLC alternation finished
      p3_hlc_turn_ = !p3_hlc_turn_;
    }
    if (convergence_reached()) p3_converged_ = true;
  }
}

void HrtTrainer::run_hlc_episode(int phase, bool mixed_reward) {
  const int n = frame_->num_stocks();
  const int days = frame_->num_days();
  const double alpha = mixed_reward ? alpha_now() : 1.0;

  Trajectory traj;
  TradingEnv env(*frame_, *signals_, env_cfg_);
  if (mixed_reward) env.reset();

  double align_total = 0, llc_total = 0;
  for (int t = 0; t + 1 < days; ++t) {
    const HlcObservation obs = hlc_observe(*signals_, t);
    double log_prob = 0;
    std::vector<double> per_stock;
    const DirectiveVector d = hlc_.sample_directive(obs, rng_ppo_, &log_prob, &per_stock);

    double align = 0, llc_reward = 0;
    if (mixed_reward) {
      const std::vector<double> sizes = llc_.act_greedy(env.llc_observation(d).values);
      const TradingEnv::StepResult res = env.step(d, sizes);
      align = res.align_sum;
      llc_reward = res.llc_reward;
    } else {
      // Phase 1 never touches the portfolio: alignment only needs prices.
      for (int i = 0; i < n; ++i)
        align += alignment_reward(d[i], frame_->open(i, t + 1) - frame_->open(i, t));
    }

    traj.inputs.push_back(hlc_.net_input(obs));
    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = action_index_from_directive(d[i]);
    traj.action_indices.push_back(std::move(indices));
    traj.log_probs.push_back(log_prob);
    traj.per_stock_log_probs.push_back(std::move(per_stock));
    traj.values.push_back(hlc_.state_value(obs));
    traj.rewards.push_back(mixed_reward ? hlc_reward(align, llc_reward, alpha) : align);
    traj.dones.push_back(t + 2 == days ? 1 : 0);

    align_total += align;
    llc_total += llc_reward;
    ++timesteps_;
  }

  compute_gae(traj, ppo_cfg_);
  const PpoUpdateStats stats = hlc_.update(traj, rng_ppo_);

  EpisodeLog log;
  log.phase = phase;
  log.controller = "hlc";
  log.alpha = alpha;
  log.align_sum = align_total;
  log.llc_return = llc_total;
  log.hlc_reward_sum = alpha * align_total + (1.0 - alpha) * llc_total;
  log.mean_align_reward = align_total / static_cast<double>(days - 1);
  log.surrogate = stats.surrogate;
  log.value_loss = stats.value_loss;
  log.entropy = stats.entropy;
  after_episode(std::move(log));
}

void HrtTrainer::run_llc_episode(int phase) {
  const int n = frame_->num_stocks();
  TradingEnv env(*frame_, *signals_, env_cfg_);
  env.reset();

  const double progress =
      static_cast<double>(llc_episodes_trained_) / static_cast<double>(std::max(1, schedule_.llc_episodes));
  const double sigma = llc_.noise_at(progress);

  double align_total = 0, llc_total = 0, critic_loss = 0, actor_obj = 0;
  int updates = 0, step_index = 0;

  DirectiveVector d = hlc_.greedy_directive(env.hlc_observation());
  LlcObservation obs = env.llc_observation(d);
  while (!env.done()) {
    const std::vector<double> action = llc_.act(obs.values, sigma, rng_ddpg_);
    const TradingEnv::StepResult res = env.step(d, action);
    align_total += res.align_sum;
    llc_total += res.llc_reward;

    Transition tr;
    tr.obs = obs.values;
    tr.action = action;
    tr.reward = res.llc_reward;
    tr.done = res.done ? 1 : 0;
    if (!res.done) {
      d = hlc_.greedy_directive(env.hlc_observation());
      obs = env.llc_observation(d);
      tr.next_obs = obs.values;
    } else {
      tr.next_obs = env.llc_observation(DirectiveVector(n)).values;
    }
    buffer_.push(std::move(tr));
    ++timesteps_;
    ++step_index;

    if (buffer_.size() >= static_cast<std::size_t>(ddpg_cfg_.batch_size) &&
        step_index % ddpg_cfg_.update_every == 0) {
      const DdpgUpdateStats stats = llc_.update(buffer_);
      critic_loss += stats.critic_loss;
      actor_obj += stats.actor_objective;
      ++updates;
    }
  }
  ++llc_episodes_trained_;

  EpisodeLog log;
  log.phase = phase;
  log.controller = "llc";
  log.alpha = alpha_now();
  log.align_sum = align_total;
  log.llc_return = llc_total;
  log.hlc_reward_sum = 0;
  log.mean_align_reward = align_total / static_cast<double>(std::max(1, step_index));
  log.critic_loss = updates > 0 ? critic_loss / updates : 0;
  log.actor_objective = updates > 0 ? actor_obj / updates : 0;
  log.noise_sigma = sigma;
  log.buffer_fill = static_cast<double>(buffer_.size()) / static_cast<double>(buffer_.capacity());
  after_episode(std::move(log));
}

void HrtTrainer::run_ddpg_only_episode() {
  const int n = frame_->num_stocks();
  TradingEnv env(*frame_, *signals_, env_cfg_);
  env.reset();

  const double progress =
      static_cast<double>(llc_episodes_trained_) / static_cast<double>(std::max(1, schedule_.llc_episodes));
  const double sigma = llc_.noise_at(progress);
  const DirectiveVector hold(n);

  double align_total = 0, llc_total = 0, critic_loss = 0, actor_obj = 0;
  int updates = 0, step_index = 0;

  LlcObservation obs = env.llc_observation(hold);
  while (!env.done()) {
    const std::vector<double> action = llc_.act(obs.values, sigma, rng_ddpg_);  // signed in [-1, 1]
    DirectiveVector d(n);
    std::vector<double> sizes(n);
    for (int i = 0; i < n; ++i) {
      const auto shares = std::llround(std::fabs(action[i]) * env_cfg_.h_max);
      d[i] = shares == 0 ? 0 : (action[i] > 0 ? 1 : -1);
      sizes[i] = std::fabs(action[i]);
    }
    const TradingEnv::StepResult res = env.step(d, sizes);
    align_total += res.align_sum;
    llc_total += res.llc_reward;

    Transition tr;
    tr.obs = obs.values;
    tr.action = action;
    tr.reward = res.llc_reward;
    tr.done = res.done ? 1 : 0;
    obs = env.llc_observation(hold);
    tr.next_obs = obs.values;
    buffer_.push(std::move(tr));
    ++timesteps_;
    ++step_index;

    if (buffer_.size() >= static_cast<std::size_t>(ddpg_cfg_.batch_size) &&
        step_index % ddpg_cfg_.update_every == 0) {
      const DdpgUpdateStats stats = llc_.update(buffer_);
      critic_loss += stats.critic_loss;
      actor_obj += stats.actor_objective;
      ++updates;
    }
  }
  ++llc_episodes_trained_;
  ++phase2_done_;

  EpisodeLog log;
  log.phase = 2;
  log.controller = "llc";
  log.alpha = schedule_.alpha0;
  log.align_sum = align_total;
  log.llc_return = llc_total;
  log.mean_align_reward = align_total / static_cast<double>(std::max(1, step_index));
  log.critic_loss = updates > 0 ? critic_loss / updates : 0;
  log.actor_objective = updates > 0 ? actor_obj / updates : 0;
  log.noise_sigma = sigma;
  log.buffer_fill = static_cast<double>(buffer_.size()) / static_cast<double>(buffer_.capacity());
  after_episode(std::move(log));
}

void HrtTrainer::after_episode(EpisodeLog log) {
  log.global_episode = global_episode_;
  log.timesteps = timesteps_;
  if (log.phase == 3) recent_returns_.push_back(log.llc_return);
  while (recent_returns_.size() > 2 * static_cast<std::size_t>(schedule_.convergence_window))
    recent_returns_.pop_front();
  write_log_line(log);
  logs_.push_back(std::move(log));
  ++global_episode_;
  maybe_periodic_checkpoint();
}

bool HrtTrainer::convergence_reached() const {
  const std::size_t window = static_cast<std::size_t>(schedule_.convergence_window);
  if (recent_returns_.size() < 2 * window) return false;
  double older = 0, newer = 0;
  for (std::size_t i = 0; i < window; ++i) {
    older += recent_returns_[i];
    newer += recent_returns_[window + i];
  }
  older /= static_cast<double>(window);
  newer /= static_cast<double>(window);
  const double rel = std::fabs(newer - older) / std::max(std::fabs(older), 1e-9);
  return rel < schedule_.convergence_tol;
}

void HrtTrainer::write_log_line(const EpisodeLog& log) {
  if (run_dir_.empty()) return;
  nlohmann::json j;
  j["phase"] = log.phase;
  j["episode"] = log.global_episode;
  j["controller"] = log.controller;
  j["alpha"] = log.alpha;
  j["align_sum"] = log.align_sum;
  j["llc_return"] = log.llc_return;
  j["hlc_reward_sum"] = log.hlc_reward_sum;
  j["mean_align_reward"] = log.mean_align_reward;
  if (log.controller == "hlc") {
    j["surrogate"] = log.surrogate;
    j["value_loss"] = log.value_loss;
    j["entropy"] = log.entropy;
  } else {
    j["critic_loss"] = log.critic_loss;
    j["actor_objective"] = log.actor_objective;
    j["noise_sigma"] = log.noise_sigma;
    j["buffer_fill"] = log.buffer_fill;
  }
  j["timesteps"] = log.timesteps;

  const std::string name = strategy_ == StrategyKind::ddpg_only
                               ? "train_ddpg_only.jsonl"
                               : "train_phase" + std::to_string(log.phase) + ".jsonl";
  std::ofstream f(run_dir_ + "/" + name, std::ios::app);
  f << j.dump() << "\n";
}

void HrtTrainer::maybe_periodic_checkpoint() {
  if (run_dir_.empty() || schedule_.checkpoint_every <= 0) return;
  if (global_episode_ % schedule_.checkpoint_every == 0)
    save_to_run_dir("checkpoint_ep" + std::to_string(global_episode_));
}

void HrtTrainer::save_to_run_dir(const std::string& name) const {
  if (run_dir_.empty()) return;
  const HrtCheckpoint ckpt = make_checkpoint();
  save_checkpoint(ckpt, run_dir_ + "/" + name + ".bin");
  save_checkpoint(ckpt, run_dir_ + "/checkpoint_last.bin");  // resume target
}

HrtCheckpoint HrtTrainer::make_checkpoint() const {
  HrtCheckpoint c;
  c.strategy = strategy_name(strategy_);
  c.n_stocks = frame_->num_stocks();
  c.n_days = frame_->num_days();
  c.env_cfg = env_cfg_;
  c.ppo_cfg = ppo_cfg_;
  c.ddpg_cfg = ddpg_cfg_;
  c.schedule = schedule_;
  c.phase = phase_;
  c.phase1_done = phase1_done_;
  c.phase2_done = phase2_done_;
  c.p3_done = p3_done_;
  c.p3_in_block = p3_in_block_;
  c.p3_pair = p3_pair_;
  c.p3_hlc_turn = p3_hlc_turn_;
  c.p3_converged = p3_converged_;
  c.global_episode = global_episode_;
  c.timesteps = timesteps_;
  c.llc_episodes_trained = llc_episodes_trained_;
  c.recent_returns.assign(recent_returns_.begin(), recent_returns_.end());
  c.policy = hlc_.policy();
  c.value = hlc_.value();
  c.actor = llc_.actor();
  c.critic = llc_.critic();
  c.actor_target = llc_.actor_target();
  c.critic_target = llc_.critic_target();
  c.policy_opt = {hlc_.policy_optimizer().first_moment(), hlc_.policy_optimizer().second_moment(),
                  hlc_.policy_optimizer().steps_taken()};
  c.value_opt = {hlc_.value_optimizer().first_moment(), hlc_.value_optimizer().second_moment(),
                 hlc_.value_optimizer().steps_taken()};
  c.actor_opt = {llc_.actor_optimizer().first_moment(), llc_.actor_optimizer().second_moment(),
                 llc_.actor_optimizer().steps_taken()};
  c.critic_opt = {llc_.critic_optimizer().first_moment(), llc_.critic_optimizer().second_moment(),
                  llc_.critic_optimizer().steps_taken()};
  c.rng_ppo = rng_ppo_.serialize();
  c.rng_ddpg = rng_ddpg_.serialize();
  c.buffer_capacity = buffer_.capacity();
  c.buffer_next = buffer_.next_slot();
  c.buffer_rng = buffer_.rng().serialize();
  c.buffer_storage = buffer_.storage();
  return c;
}

void HrtTrainer::restore(const HrtCheckpoint& c) {
  if (c.n_stocks != frame_->num_stocks() || c.n_days != frame_->num_days())
    throw Error(Errc::dimension_mismatch, "checkpoint was trained on a different market");
  strategy_ = strategy_from_name(c.strategy);
  env_cfg_ = c.env_cfg;
  ppo_cfg_ = c.ppo_cfg;
  ddpg_cfg_ = c.ddpg_cfg;
  schedule_ = c.schedule;

  hlc_ = make_ppo_agent(c);
  llc_ = make_ddpg_agent(c);
  buffer_ = ReplayBuffer(c.buffer_capacity, 0);
  buffer_.restore(c.buffer_storage, c.buffer_next, Rng::deserialize(c.buffer_rng));
  rng_ppo_ = Rng::deserialize(c.rng_ppo);
  rng_ddpg_ = Rng::deserialize(c.rng_ddpg);

  phase_ = c.phase;
  phase1_done_ = c.phase1_done;
  phase2_done_ = c.phase2_done;
  p3_done_ = c.p3_done;
  p3_in_block_ = c.p3_in_block;
  p3_pair_ = c.p3_pair;
  p3_hlc_turn_ = c.p3_hlc_turn;
  p3_converged_ = c.p3_converged;
  global_episode_ = c.global_episode;
  timesteps_ = c.timesteps;
  llc_episodes_trained_ = c.llc_episodes_trained;
  recent_returns_.assign(c.recent_returns.begin(), c.recent_returns.end());
}

PpoAgent make_ppo_agent(const HrtCheckpoint& c) {
  PpoAgent agent(c.n_stocks, c.ppo_cfg, c.schedule.seed);
  agent.policy() = c.policy;
  agent.value() = c.value;
  agent.policy_optimizer().restore(c.policy_opt.m, c.policy_opt.v, c.policy_opt.t);
  agent.value_optimizer().restore(c.value_opt.m, c.value_opt.v, c.value_opt.t);
  return agent;
}

DdpgAgent make_ddpg_agent(const HrtCheckpoint& c) {
  const ActionMode mode =
      c.strategy == "ddpg_only" ? ActionMode::signed_range : ActionMode::magnitude01;
  DdpgAgent agent(3 * c.n_stocks + 1, c.n_stocks, mode, c.ddpg_cfg, c.schedule.seed);
  agent.actor() = c.actor;
  agent.critic() = c.critic;
  agent.actor_target() = c.actor_target;
  agent.critic_target() = c.critic_target;
  agent.actor_optimizer().restore(c.actor_opt.m, c.actor_opt.v, c.actor_opt.t);
  agent.critic_optimizer().restore(c.critic_opt.m, c.critic_opt.v, c.critic_opt.t);
  return agent;
}

}  // namespace hrt
