#include "hrt/trading_env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "hrt/error.hpp"

namespace hrt {

void EnvConfig::validate() const {
  if (!(initial_capital > 0)) throw Error(Errc::invalid_spec, "initial_capital must be > 0");
  if (!(cost_rate >= 0 && cost_rate < 1)) throw Error(Errc::invalid_spec, "cost_rate must be in [0, 1)");
  if (h_max < 1) throw Error(Errc::invalid_spec, "h_max must be >= 1");
  if (!(reward_scale > 0)) throw Error(Errc::invalid_spec, "reward_scale must be > 0");
}

std::vector<double> HlcObservation::flat() const {
  std::vector<double> v;
  v.reserve(fr.size() + ss.size());
  v.insert(v.end(), fr.begin(), fr.end());
  v.insert(v.end(), ss.begin(), ss.end());
  return v;
}

void write_trade_log_csv(const TradeLog& log, std::span<const std::string> tickers, const std::string& path) {
  std::string out = "day,ticker,action,shares_executed,price,cost\n";
  char buf[32];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, p);
  };
  for (const TradeRecord& tr : log) {
    out += std::to_string(tr.day);
    out += ',';
    out += tickers[tr.stock];
    out += ',';
    out += tr.action > 0 ? "buy" : "sell";
    out += ',';
    out += std::to_string(tr.shares);
    out += ',';
    num(tr.price);
    out += ',';
    num(tr.cost);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot write " + path);
  f << out;
}

int alignment_reward(int directive_entry, double delta_price) {
  if (directive_entry == 0) return 0;
  const int sgn = delta_price > 0 ? 1 : delta_price < 0 ? -1 : 0;
  return directive_entry * sgn;
}

double alpha_schedule(double t, double alpha0, double lambda) { return alpha0 * std::exp(-lambda * t); }

double hlc_reward(double align_sum, double llc_reward, double alpha_t) {
  return alpha_t * align_sum + (1.0 - alpha_t) * llc_reward;
}

TradeOutcome execute_share_orders(const PortfolioState& state, const DirectiveVector& directive,
                                  std::span<const std::int64_t> desired_shares, const EnvConfig& cfg,
                                  std::span<const double> next_prices) {
  const int n = static_cast<int>(state.prices.size());
  if (directive.size() != n || static_cast<int>(desired_shares.size()) != n ||
      static_cast<int>(next_prices.size()) != n)
    throw Error(Errc::dimension_mismatch, "directive/shares/prices length mismatch");
  if (!directive.valid()) throw Error(Errc::invalid_spec, "directive entries must be in {-1, 0, 1}");

  const double value_before = state.value();

  TradeOutcome out;
  out.next = state;

  // Sells first so their proceeds can fund the buys.
  for (int i = 0; i < n; ++i) {
    if (directive[i] != -1) continue;
    const std::int64_t shares = std::min(desired_shares[i], out.next.holdings[i]);
    if (shares <= 0) continue;
    const double notional = state.prices[i] * static_cast<double>(shares);
    out.next.holdings[i] -= shares;
    out.next.cash += (1.0 - cfg.cost_rate) * notional;
    out.trades.push_back({state.day, i, -1, -shares, state.prices[i], cfg.cost_rate * notional});
  }
  // Buys in ascending stock order, each clipped by the cash still available.
  for (int i = 0; i < n; ++i) {
    if (directive[i] != 1) continue;
    const double unit_cost = (1.0 + cfg.cost_rate) * state.prices[i];
    const std::int64_t affordable = static_cast<std::int64_t>(std::floor(out.next.cash / unit_cost));
    const std::int64_t shares = std::min(desired_shares[i], affordable);
    if (shares <= 0) continue;
    const double notional = state.prices[i] * static_cast<double>(shares);
    out.next.holdings[i] += shares;
    out.next.cash -= (1.0 + cfg.cost_rate) * notional;
    out.trades.push_back({state.day, i, 1, shares, state.prices[i], cfg.cost_rate * notional});
  }

  out.next.prices.assign(next_prices.begin(), next_prices.end());
  out.next.day = state.day + 1;
  out.llc_reward = cfg.reward_scale * (out.next.value() - value_before);
  return out;
}

TradeOutcome execute_trades(const PortfolioState& state, const DirectiveVector& directive,
                            std::span<const double> sizes, const EnvConfig& cfg,
                            std::span<const double> next_prices) {
  const int n = static_cast<int>(state.prices.size());
  if (static_cast<int>(sizes.size()) != n) throw Error(Errc::dimension_mismatch, "sizes length mismatch");
  for (double s : sizes)
    if (!std::isfinite(s)) throw Error(Errc::non_finite_sizes, "trade size is not finite");

  std::vector<std::int64_t> desired(n, 0);
  for (int i = 0; i < n; ++i)
    if (directive[i] != 0)
      desired[i] = static_cast<std::int64_t>(std::llround(std::clamp(sizes[i], 0.0, 1.0) * cfg.h_max));
  return execute_share_orders(state, directive, desired, cfg, next_prices);
}

HlcObservation hlc_observe(const SignalPanel& signals, int day) {
  if (day < 0 || day >= signals.fr.cols()) throw Error(Errc::dimension_mismatch, "day out of range");
  HlcObservation obs;
  const int n = signals.fr.rows();
  obs.fr.resize(n);
  obs.ss.resize(n);
  for (int i = 0; i < n; ++i) {
    obs.fr[i] = signals.fr.at(i, day);
    obs.ss[i] = signals.ss.at(i, day);
  }
  return obs;
}

LlcObservation llc_observe(const PortfolioState& state, const DirectiveVector& directive,
                           const LlcNormalizer& norm) {
  const int n = static_cast<int>(state.prices.size());
  if (directive.size() != n || static_cast<int>(norm.first_open.size()) != n)
    throw Error(Errc::dimension_mismatch, "directive/normalizer length mismatch");
  LlcObservation obs;
  obs.values.reserve(3 * n + 1);
  for (int i = 0; i < n; ++i) obs.values.push_back(state.prices[i] / norm.first_open[i]);
  for (int i = 0; i < n; ++i) obs.values.push_back(static_cast<double>(state.holdings[i]) / norm.h_max);
  obs.values.push_back(state.cash / norm.initial_capital);
  for (int i = 0; i < n; ++i) obs.values.push_back(static_cast<double>(directive[i]));
  return obs;
}

TradingEnv::TradingEnv(const MarketFrame& frame, const SignalPanel& signals, EnvConfig cfg)
    : frame_(&frame), signals_(&signals), cfg_(cfg) {
  cfg_.validate();
  if (signals.fr.rows() != frame.num_stocks() || signals.fr.cols() != frame.num_days())
    throw Error(Errc::dimension_mismatch, "signal panel does not match frame");
}

std::pair<PortfolioState, HlcObservation> TradingEnv::reset() {
  if (frame_->num_days() < 2) throw Error(Errc::frame_too_short, "need at least 2 trading days");
  const int n = frame_->num_stocks();
  state_.prices.resize(n);
  for (int i = 0; i < n; ++i) state_.prices[i] = frame_->open(i, 0);
  state_.holdings.assign(n, 0);
  state_.cash = cfg_.initial_capital;
  state_.day = 0;

  norm_.first_open = state_.prices;
  norm_.initial_capital = cfg_.initial_capital;
  norm_.h_max = cfg_.h_max;

  log_.clear();
  started_ = true;
  return {state_, hlc_observation()};
}

TradingEnv::StepResult TradingEnv::step(const DirectiveVector& directive, std::span<const double> sizes) {
  if (!started_) throw Error(Errc::invalid_spec, "step before reset");
  if (done()) throw Error(Errc::last_day, "episode already finished");

  const int n = frame_->num_stocks();
  const int t = state_.day;
  std::vector<double> next_prices(n);
  for (int i = 0; i < n; ++i) next_prices[i] = frame_->open(i, t + 1);

  StepResult res;
  for (int i = 0; i < n; ++i)
    res.align_sum += alignment_reward(directive[i], next_prices[i] - state_.prices[i]);

  TradeOutcome outcome = execute_trades(state_, directive, sizes, cfg_, next_prices);
  state_ = std::move(outcome.next);
  log_.insert(log_.end(), outcome.trades.begin(), outcome.trades.end());
  res.llc_reward = outcome.llc_reward;
  res.done = done();
  return res;
}

TradingEnv::StepResult TradingEnv::step_shares(const DirectiveVector& directive,
                                               std::span<const std::int64_t> desired_shares) {
  if (!started_) throw Error(Errc::invalid_spec, "step before reset");
  if (done()) throw Error(Errc::last_day, "episode already finished");

  const int n = frame_->num_stocks();
  const int t = state_.day;
  std::vector<double> next_prices(n);
  for (int i = 0; i < n; ++i) next_prices[i] = frame_->open(i, t + 1);

  StepResult res;
  for (int i = 0; i < n; ++i)
    res.align_sum += alignment_reward(directive[i], next_prices[i] - state_.prices[i]);

  TradeOutcome outcome = execute_share_orders(state_, directive, desired_shares, cfg_, next_prices);
  state_ = std::move(outcome.next);
  log_.insert(log_.end(), outcome.trades.begin(), outcome.trades.end());
  res.llc_reward = outcome.llc_reward;
  res.done = done();
  return res;
}

}  // namespace hrt
