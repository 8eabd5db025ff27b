#include "hrt/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "hrt/error.hpp"

namespace hrt {

namespace {

double safe_log(double p) { return std::log(std::max(p, 1e-12)); }

// Deterministic Fisher-Yates (std::shuffle is implementation-defined).
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

void PpoConfig::validate() const {
  if (!(learning_rate > 0)) throw Error(Errc::invalid_spec, "ppo learning_rate must be > 0");
  if (!(clip_eps > 0)) throw Error(Errc::invalid_spec, "clip_eps must be > 0");
  if (!(gamma > 0 && gamma <= 1)) throw Error(Errc::invalid_spec, "gamma must be in (0, 1]");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw Error(Errc::invalid_spec, "gae_lambda must be in [0, 1]");
  if (epochs < 1 || minibatch_size < 1) throw Error(Errc::invalid_spec, "epochs/minibatch_size must be >= 1");
  for (int h : hidden)
    if (h < 1) throw Error(Errc::invalid_spec, "hidden width must be >= 1");
}

int directive_from_action_index(int index) {
  switch (index) {
    case 0: return 1;
    case 1: return -1;
    case 2: return 0;
  }
  throw Error(Errc::invalid_spec, "action index out of range");
}

int action_index_from_directive(int directive_entry) {
  switch (directive_entry) {
    case 1: return 0;
    case -1: return 1;
    case 0: return 2;
  }
  throw Error(Errc::invalid_spec, "directive entry out of range");
}

std::vector<int> sample_from_probs(std::span<const double> probs, Rng& rng, double* joint_log_prob,
                                   std::vector<double>* per_group_log_probs) {
  if (probs.size() % 3 != 0) throw Error(Errc::shape_mismatch, "probability vector length % 3 != 0");
  const int groups = static_cast<int>(probs.size() / 3);
  std::vector<int> picks(groups);
  double joint = 0;
  if (per_group_log_probs) per_group_log_probs->resize(groups);
  for (int g = 0; g < groups; ++g) {
    const double u = rng.uniform();
    const double p0 = probs[3 * g], p1 = probs[3 * g + 1];
    int k = u < p0 ? 0 : (u < p0 + p1 ? 1 : 2);
    picks[g] = k;
    const double lp = safe_log(probs[3 * g + k]);
    joint += lp;
    if (per_group_log_probs) (*per_group_log_probs)[g] = lp;
  }
  if (joint_log_prob) *joint_log_prob = joint;
  return picks;
}

void Trajectory::clear() {
  inputs.clear();
  action_indices.clear();
  log_probs.clear();
  per_stock_log_probs.clear();
  values.clear();
  rewards.clear();
  dones.clear();
  rewards_to_go.clear();
  advantages.clear();
  bootstrap_value = 0;
}

void compute_gae(Trajectory& traj, const PpoConfig& cfg) {
  const std::size_t n = traj.size();
  if (n == 0) throw Error(Errc::invalid_spec, "empty trajectory");
  traj.advantages.assign(n, 0.0);
  traj.rewards_to_go.assign(n, 0.0);

  double running = 0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = traj.dones[t] ? 0.0 : 1.0;
    const double next_value = (t + 1 < n) ? traj.values[t + 1] : traj.bootstrap_value;
    const double delta = traj.rewards[t] + cfg.gamma * next_value * not_done - traj.values[t];
    running = delta + cfg.gamma * cfg.gae_lambda * not_done * running;
    traj.advantages[t] = running;
  }
  for (std::size_t t = 0; t < n; ++t) traj.rewards_to_go[t] = traj.advantages[t] + traj.values[t];

  double mean = 0;
  for (double a : traj.advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double a : traj.advantages) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / static_cast<double>(n));
  for (double& a : traj.advantages) a = (a - mean) / (std + 1e-8);
}

PpoAgent::PpoAgent(int n_stocks, PpoConfig cfg, std::uint64_t seed) : n_stocks_(n_stocks), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (n_stocks < 1) throw Error(Errc::invalid_spec, "need at least one stock");

  std::vector<int> policy_sizes{2 * n_stocks};
  std::vector<Activation> policy_acts;
  for (int h : cfg_.hidden) {
    policy_sizes.push_back(h);
    policy_acts.push_back(Activation::tanh);
  }
  policy_sizes.push_back(3 * n_stocks);
  policy_acts.push_back(Activation::softmax_group3);
  policy_ = Mlp(policy_sizes, policy_acts, derive_seed(seed, 1));

  std::vector<int> value_sizes{2 * n_stocks};
  std::vector<Activation> value_acts;
  for (int h : cfg_.hidden) {
    value_sizes.push_back(h);
    value_acts.push_back(Activation::tanh);
  }
  value_sizes.push_back(1);
  value_acts.push_back(Activation::identity);
  value_ = Mlp(value_sizes, value_acts, derive_seed(seed, 2));

  policy_opt_ = AdamW({.learning_rate = cfg_.learning_rate}, policy_.param_count());
  value_opt_ = AdamW({.learning_rate = cfg_.learning_rate}, value_.param_count());
}

std::vector<double> PpoAgent::net_input(const HlcObservation& obs) const {
  if (static_cast<int>(obs.fr.size()) != n_stocks_ || static_cast<int>(obs.ss.size()) != n_stocks_)
    throw Error(Errc::shape_mismatch, "observation does not match stock count");
  std::vector<double> x;
  x.reserve(2 * n_stocks_);
  for (double v : obs.fr) x.push_back(v * cfg_.fr_input_scale);
  for (double v : obs.ss) x.push_back(v);
  return x;
}

DirectiveVector PpoAgent::sample_directive(const HlcObservation& obs, Rng& rng, double* joint_log_prob,
                                           std::vector<double>* per_stock_log_probs) const {
  const std::vector<double> probs = policy_.forward(net_input(obs));
  const std::vector<int> picks = sample_from_probs(probs, rng, joint_log_prob, per_stock_log_probs);
  DirectiveVector d(n_stocks_);
  for (int i = 0; i < n_stocks_; ++i) d[i] = directive_from_action_index(picks[i]);
  return d;
}

DirectiveVector PpoAgent::greedy_directive(const HlcObservation& obs) const {
  const std::vector<double> probs = policy_.forward(net_input(obs));
  DirectiveVector d(n_stocks_);
  for (int i = 0; i < n_stocks_; ++i) {
    const double* g = probs.data() + 3 * i;
    int best = 0;
    if (g[1] > g[best]) best = 1;
    if (g[2] > g[best]) best = 2;
    d[i] = directive_from_action_index(best);
  }
  return d;
}

double PpoAgent::state_value(const HlcObservation& obs) const { return value_.forward(net_input(obs))[0]; }

PpoUpdateStats PpoAgent::update(const Trajectory& traj, Rng& rng) {
  const std::size_t n = traj.size();
  if (n == 0) throw Error(Errc::invalid_spec, "empty trajectory");
  if (traj.advantages.size() != n || traj.rewards_to_go.size() != n)
    throw Error(Errc::invalid_spec, "advantages not computed");

  PpoUpdateStats stats;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<double> policy_grad(policy_.param_count());
  std::vector<double> value_grad(value_.param_count());
  std::vector<double> grad_out(3 * n_stocks_);
  Mlp::Tape policy_tape, value_tape;
  const double eps = cfg_.clip_eps;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double epoch_surrogate = 0, epoch_value_loss = 0, epoch_entropy = 0;

    for (std::size_t start = 0; start < n; start += cfg_.minibatch_size) {
      const std::size_t stop = std::min(n, start + cfg_.minibatch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::fill(policy_grad.begin(), policy_grad.end(), 0.0);
      std::fill(value_grad.begin(), value_grad.end(), 0.0);
      double batch_surrogate = 0, batch_value_loss = 0, batch_entropy = 0;

      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t t = order[b];
        const double advantage = traj.advantages[t];

        // --- policy ---
        std::span<const double> probs = policy_.forward(traj.inputs[t], policy_tape);
        double new_log_prob = 0;
        for (int i = 0; i < n_stocks_; ++i)
          new_log_prob += safe_log(probs[3 * i + traj.action_indices[t][i]]);
        const double ratio = std::exp(new_log_prob - traj.log_probs[t]);

        const double unclipped = ratio * advantage;
        const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
        const double objective = std::min(unclipped, clipped);
        batch_surrogate += objective;

        // d objective / d ratio; zero when the active branch is the clamped
        // constant.
        double d_ratio = 0;
        if (unclipped <= clipped) {
          d_ratio = advantage;
        } else if (ratio >= 1.0 - eps && ratio <= 1.0 + eps) {
          d_ratio = advantage;
        }
        if (d_ratio != 0.0) {
          stats.max_ratio_used = std::max(stats.max_ratio_used, ratio);
          stats.min_ratio_used = std::min(stats.min_ratio_used, ratio);
          if (clipped < unclipped && (ratio < 1.0 - eps || ratio > 1.0 + eps)) ++stats.clip_violations;
        }

        std::fill(grad_out.begin(), grad_out.end(), 0.0);
        if (d_ratio != 0.0) {
          // d ratio / d p_i(a_i) = ratio / p_i(a_i), evaluated in log space.
          for (int i = 0; i < n_stocks_; ++i) {
            const int k = 3 * i + traj.action_indices[t][i];
            grad_out[k] += d_ratio * std::exp(new_log_prob - traj.log_probs[t] - safe_log(probs[k]));
          }
        }
        double entropy = 0;
        for (int i = 0; i < 3 * n_stocks_; ++i) {
          const double lp = safe_log(probs[i]);
          entropy -= probs[i] * lp;
          grad_out[i] += cfg_.entropy_coef * (-(lp + 1.0));
        }
        batch_entropy += entropy / n_stocks_;
        // Maximize objective + entropy bonus: accumulate the negated gradient.
        for (double& g : grad_out) g *= -inv_batch;
        policy_.backward(policy_tape, grad_out, policy_grad);

        // --- value ---
        std::span<const double> v = value_.forward(traj.inputs[t], value_tape);
        const double err = v[0] - traj.rewards_to_go[t];
        batch_value_loss += err * err;
        const double vg[1] = {2.0 * err * inv_batch};
        value_.backward(value_tape, vg, value_grad);
      }

      batch_surrogate *= inv_batch;
      batch_value_loss *= inv_batch;
      batch_entropy *= inv_batch;
      if (!std::isfinite(batch_surrogate) || !std::isfinite(batch_value_loss))
        throw Error(Errc::non_finite_loss, "PPO loss diverged at optimizer step " +
                                               std::to_string(policy_opt_.steps_taken()));

      clip_global_norm(policy_grad, cfg_.max_grad_norm);
      clip_global_norm(value_grad, cfg_.max_grad_norm);
      policy_opt_.step(policy_.params(), policy_grad);
      value_opt_.step(value_.params(), value_grad);

      epoch_surrogate += batch_surrogate * static_cast<double>(stop - start);
      epoch_value_loss += batch_value_loss * static_cast<double>(stop - start);
      epoch_entropy += batch_entropy * static_cast<double>(stop - start);
    }

    stats.surrogate = epoch_surrogate / static_cast<double>(n);
    stats.value_loss = epoch_value_loss / static_cast<double>(n);
    stats.entropy = epoch_entropy / static_cast<double>(n);
  }
  return stats;
}

std::optional<double> hlc_accuracy(const PpoAgent& agent, const MarketFrame& frame, const SignalPanel& signals) {
  std::int64_t traded = 0, correct = 0;
  for (int t = 0; t + 1 < frame.num_days(); ++t) {
    const DirectiveVector d = agent.greedy_directive(hlc_observe(signals, t));
    for (int i = 0; i < frame.num_stocks(); ++i) {
      if (d[i] == 0) continue;
      const double ret = realized_forward_return(frame, i, t);
      if (ret == 0) continue;  // no direction to match
      ++traded;
      if ((d[i] > 0) == (ret > 0)) ++correct;
    }
  }
  if (traded == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(traded);
}

}  // namespace hrt
