#include <zlib.h>

#include "hrt/binio.hpp"
#include "hrt/error.hpp"
#include "hrt/trainer.hpp"

namespace hrt {

namespace {

constexpr std::uint32_t kCkptMagic = 0x43545248;  // "HRTC"

std::uint32_t crc_of(const std::string& bytes, std::size_t offset, std::size_t length) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset), static_cast<uInt>(length));
  return static_cast<std::uint32_t>(crc);
}

void put_mlp(BinWriter& w, const Mlp& net) {
  w.u32(static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (int s : net.layer_sizes()) w.u32(static_cast<std::uint32_t>(s));
  for (Activation a : net.activations()) w.u8(static_cast<std::uint8_t>(a));
  w.u64(net.seed());
  w.f64_vec(net.params());
}

Mlp get_mlp(BinReader& r) {
  const std::uint32_t n = r.u32();
  std::vector<int> sizes(n);
  for (auto& s : sizes) s = static_cast<int>(r.u32());
  std::vector<Activation> acts(n - 1);
  for (auto& a : acts) a = static_cast<Activation>(r.u8());
  const std::uint64_t seed = r.u64();
  Mlp net(sizes, acts, seed);
  net.params() = r.f64_vec();
  return net;
}

void put_opt(BinWriter& w, const HrtCheckpoint::OptState& o) {
  w.f64_vec(o.m);
  w.f64_vec(o.v);
  w.i64(o.t);
}

HrtCheckpoint::OptState get_opt(BinReader& r) {
  HrtCheckpoint::OptState o;
  o.m = r.f64_vec();
  o.v = r.f64_vec();
  o.t = r.i64();
  return o;
}

void put_env_cfg(BinWriter& w, const EnvConfig& c) {
  w.f64(c.initial_capital);
  w.f64(c.cost_rate);
  w.u32(static_cast<std::uint32_t>(c.h_max));
  w.f64(c.reward_scale);
}

EnvConfig get_env_cfg(BinReader& r) {
  EnvConfig c;
  c.initial_capital = r.f64();
  c.cost_rate = r.f64();
  c.h_max = static_cast<int>(r.u32());
  c.reward_scale = r.f64();
  return c;
}

void put_ppo_cfg(BinWriter& w, const PpoConfig& c) {
  w.f64(c.learning_rate);
  w.f64(c.clip_eps);
  w.f64(c.gamma);
  w.f64(c.gae_lambda);
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.u32(static_cast<std::uint32_t>(c.minibatch_size));
  w.u32(static_cast<std::uint32_t>(c.rollout_horizon));
  w.f64(c.entropy_coef);
  w.f64(c.max_grad_norm);
  w.f64(c.fr_input_scale);
  w.u32(static_cast<std::uint32_t>(c.hidden.size()));
  for (int h : c.hidden) w.u32(static_cast<std::uint32_t>(h));
}

PpoConfig get_ppo_cfg(BinReader& r) {
  PpoConfig c;
  c.learning_rate = r.f64();
  c.clip_eps = r.f64();
  c.gamma = r.f64();
  c.gae_lambda = r.f64();
  c.epochs = static_cast<int>(r.u32());
  c.minibatch_size = static_cast<int>(r.u32());
  c.rollout_horizon = static_cast<int>(r.u32());
  c.entropy_coef = r.f64();
  c.max_grad_norm = r.f64();
  c.fr_input_scale = r.f64();
  c.hidden.resize(r.u32());
  for (auto& h : c.hidden) h = static_cast<int>(r.u32());
  return c;
}

void put_ddpg_cfg(BinWriter& w, const DdpgConfig& c) {
  w.f64(c.actor_lr);
  w.f64(c.critic_lr);
  w.f64(c.tau);
  w.f64(c.gamma);
  w.u32(static_cast<std::uint32_t>(c.batch_size));
  w.u64(c.buffer_capacity);
  w.f64(c.noise_sigma);
  w.f64(c.noise_decay);
  w.u32(static_cast<std::uint32_t>(c.update_every));
  w.f64(c.max_grad_norm);
  w.u32(static_cast<std::uint32_t>(c.hidden.size()));
  for (int h : c.hidden) w.u32(static_cast<std::uint32_t>(h));
}

DdpgConfig get_ddpg_cfg(BinReader& r) {
  DdpgConfig c;
  c.actor_lr = r.f64();
  c.critic_lr = r.f64();
  c.tau = r.f64();
  c.gamma = r.f64();
  c.batch_size = static_cast<int>(r.u32());
  c.buffer_capacity = r.u64();
  c.noise_sigma = r.f64();
  c.noise_decay = r.f64();
  c.update_every = static_cast<int>(r.u32());
  c.max_grad_norm = r.f64();
  c.hidden.resize(r.u32());
  for (auto& h : c.hidden) h = static_cast<int>(r.u32());
  return c;
}

void put_schedule(BinWriter& w, const TrainSchedule& s) {
  w.u32(static_cast<std::uint32_t>(s.hlc_episodes));
  w.u32(static_cast<std::uint32_t>(s.llc_episodes));
  w.u32(static_cast<std::uint32_t>(s.phase3_block));
  w.f64(s.switch_growth);
  w.u32(static_cast<std::uint32_t>(s.max_phase3_episodes));
  w.u32(static_cast<std::uint32_t>(s.convergence_window));
  w.f64(s.convergence_tol);
  w.i64(s.total_timesteps);
  w.f64(s.alpha0);
  w.f64(s.lambda);
  w.u64(s.seed);
  w.u32(static_cast<std::uint32_t>(s.checkpoint_every));
}

TrainSchedule get_schedule(BinReader& r) {
  TrainSchedule s;
  s.hlc_episodes = static_cast<int>(r.u32());
  s.llc_episodes = static_cast<int>(r.u32());
  s.phase3_block = static_cast<int>(r.u32());
  s.switch_growth = r.f64();
  s.max_phase3_episodes = static_cast<int>(r.u32());
  s.convergence_window = static_cast<int>(r.u32());
  s.convergence_tol = r.f64();
  s.total_timesteps = r.i64();
  s.alpha0 = r.f64();
  s.lambda = r.f64();
  s.seed = r.u64();
  s.checkpoint_every = static_cast<int>(r.u32());
  return s;
}

void put_transition(BinWriter& w, const Transition& t) {
  w.f64_vec(t.obs);
  w.f64_vec(t.action);
  w.f64(t.reward);
  w.f64_vec(t.next_obs);
  w.u8(t.done);
}

Transition get_transition(BinReader& r) {
  Transition t;
  t.obs = r.f64_vec();
  t.action = r.f64_vec();
  t.reward = r.f64();
  t.next_obs = r.f64_vec();
  t.done = r.u8();
  return t;
}

}  // namespace

void save_checkpoint(const HrtCheckpoint& c, const std::string& path) {
  BinWriter w;
  w.str(c.strategy);
  w.u32(static_cast<std::uint32_t>(c.n_stocks));
  w.u32(static_cast<std::uint32_t>(c.n_days));
  put_env_cfg(w, c.env_cfg);
  put_ppo_cfg(w, c.ppo_cfg);
  put_ddpg_cfg(w, c.ddpg_cfg);
  put_schedule(w, c.schedule);

  w.u32(static_cast<std::uint32_t>(c.phase));
  w.u32(static_cast<std::uint32_t>(c.phase1_done));
  w.u32(static_cast<std::uint32_t>(c.phase2_done));
  w.u32(static_cast<std::uint32_t>(c.p3_done));
  w.u32(static_cast<std::uint32_t>(c.p3_in_block));
  w.u32(static_cast<std::uint32_t>(c.p3_pair));
  w.u8(c.p3_hlc_turn ? 1 : 0);
  w.u8(c.p3_converged ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.global_episode));
  w.i64(c.timesteps);
  w.u32(static_cast<std::uint32_t>(c.llc_episodes_trained));
  w.f64_vec(c.recent_returns);

  for (const Mlp* net : {&c.policy, &c.value, &c.actor, &c.critic, &c.actor_target, &c.critic_target})
    put_mlp(w, *net);
  for (const HrtCheckpoint::OptState* o : {&c.policy_opt, &c.value_opt, &c.actor_opt, &c.critic_opt})
    put_opt(w, *o);

  w.str(c.rng_ppo);
  w.str(c.rng_ddpg);

  w.u64(c.buffer_capacity);
  w.u64(c.buffer_next);
  w.str(c.buffer_rng);
  w.u64(c.buffer_storage.size());
  for (const Transition& t : c.buffer_storage) put_transition(w, t);

  BinWriter file;
  file.u32(kCkptMagic);
  file.u32(HrtCheckpoint::kVersion);
  std::string bytes = file.buffer() + w.buffer();
  const std::uint32_t crc = crc_of(bytes, 8, bytes.size() - 8);
  BinWriter tail;
  tail.u32(crc);
  write_file_bytes(path, bytes + tail.buffer());
}

HrtCheckpoint load_checkpoint(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() < 12) throw Error(Errc::checksum_error, path + ": file too short");

  BinReader head(bytes.substr(0, 8));
  if (head.u32() != kCkptMagic) throw Error(Errc::io_error, path + ": not an HRT checkpoint");
  const std::uint32_t version = head.u32();
  if (version != HrtCheckpoint::kVersion)
    throw Error(Errc::version_error, path + ": checkpoint version " + std::to_string(version) +
                                         ", expected " + std::to_string(HrtCheckpoint::kVersion));

  BinReader tail(bytes.substr(bytes.size() - 4));
  const std::uint32_t stored_crc = tail.u32();
  if (crc_of(bytes, 8, bytes.size() - 12) != stored_crc)
    throw Error(Errc::checksum_error, path + ": payload CRC mismatch");

  BinReader r(bytes.substr(8, bytes.size() - 12));
  HrtCheckpoint c;
  c.strategy = r.str();
  c.n_stocks = static_cast<int>(r.u32());
  c.n_days = static_cast<int>(r.u32());
  c.env_cfg = get_env_cfg(r);
  c.ppo_cfg = get_ppo_cfg(r);
  c.ddpg_cfg = get_ddpg_cfg(r);
  c.schedule = get_schedule(r);

  c.phase = static_cast<int>(r.u32());
  c.phase1_done = static_cast<int>(r.u32());
  c.phase2_done = static_cast<int>(r.u32());
  c.p3_done = static_cast<int>(r.u32());
  c.p3_in_block = static_cast<int>(r.u32());
  c.p3_pair = static_cast<int>(r.u32());
  c.p3_hlc_turn = r.u8() != 0;
  c.p3_converged = r.u8() != 0;
  c.global_episode = static_cast<int>(r.u32());
  c.timesteps = r.i64();
  c.llc_episodes_trained = static_cast<int>(r.u32());
  c.recent_returns = r.f64_vec();

  c.policy = get_mlp(r);
  c.value = get_mlp(r);
  c.actor = get_mlp(r);
  c.critic = get_mlp(r);
  c.actor_target = get_mlp(r);
  c.critic_target = get_mlp(r);
  c.policy_opt = get_opt(r);
  c.value_opt = get_opt(r);
  c.actor_opt = get_opt(r);
  c.critic_opt = get_opt(r);

  c.rng_ppo = r.str();
  c.rng_ddpg = r.str();

  c.buffer_capacity = r.u64();
  c.buffer_next = r.u64();
  c.buffer_rng = r.str();
  c.buffer_storage.resize(r.u64());
  for (auto& t : c.buffer_storage) t = get_transition(r);
  return c;
}

}  // namespace hrt
