#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hrt/market_data.hpp"

namespace hrt {

struct EnvConfig {
  double initial_capital = 1'000'000.0;
  double cost_rate = 0.001;    // proportional transaction cost
  int h_max = 100;             // max shares traded per stock per day
  double reward_scale = 1e-4;  // applied to the portfolio-value delta

  void validate() const;  // throws InvalidSpec
};

// Per-stock direction: +1 buy, -1 sell, 0 hold.
struct DirectiveVector {
  std::vector<int> entries;

  DirectiveVector() = default;
  explicit DirectiveVector(int n) : entries(n, 0) {}
  explicit DirectiveVector(std::vector<int> e) : entries(std::move(e)) {}

  int size() const { return static_cast<int>(entries.size()); }
  int& operator[](int i) { return entries[i]; }
  int operator[](int i) const { return entries[i]; }

  bool valid() const {
    for (int a : entries)
      if (a < -1 || a > 1) return false;
    return true;
  }

  bool operator==(const DirectiveVector& other) const = default;
};

// Long-only portfolio: current open prices, integer share holdings, cash.
struct PortfolioState {
  std::vector<double> prices;
  std::vector<std::int64_t> holdings;
  double cash = 0;
  int day = 0;

  double value() const {
    double v = cash;
    for (std::size_t i = 0; i < prices.size(); ++i) v += prices[i] * static_cast<double>(holdings[i]);
    return v;
  }
};

// HLC state: predicted forward returns then sentiment scores, length 2N.
struct HlcObservation {
  std::vector<double> fr;
  std::vector<double> ss;

  std::vector<double> flat() const;
};

// LLC state: [prices, holdings, cash, directive], length 3N+1. Prices are
// divided by each stock's first open, holdings by h_max, cash by the initial
// capital; directive entries pass through unchanged.
struct LlcObservation {
  std::vector<double> values;  // flattened, ready for the actor/critic

  int size() const { return static_cast<int>(values.size()); }
};

struct TradeRecord {
  int day = 0;
  int stock = 0;
  int action = 0;  // +1 buy, -1 sell
  std::int64_t shares = 0;  // signed executed shares
  double price = 0;
  double cost = 0;  // transaction cost paid
};
using TradeLog = std::vector<TradeRecord>;

// CSV export, header day,ticker,action,shares_executed,price,cost.
void write_trade_log_csv(const TradeLog& log, std::span<const std::string> tickers, const std::string& path);

// --- reward pieces ---

// Eq.-style alignment score: 0 for hold, else sign(action) * sgn(delta_p).
int alignment_reward(int directive_entry, double delta_price);

// Exponential decay alpha_t = alpha0 * exp(-lambda * t).
double alpha_schedule(double t, double alpha0 = 1.0, double lambda = 0.001);

// Mixed HLC reward: alpha * alignment sum + (1 - alpha) * (scaled) LLC reward.
double hlc_reward(double align_sum, double llc_reward, double alpha_t);

// --- trade execution ---

struct TradeOutcome {
  PortfolioState next;  // holdings/cash after trades, prices = next_prices, day advanced
  double llc_reward = 0;  // reward_scale * (value at next_prices after trades - value at prices before)
  std::vector<TradeRecord> trades;  // executed (nonzero) trades only
};

// Executes one day of trades at the current open prices. Desired shares are
// round(sizes[i] * h_max) for buy/sell directives, zero for hold. Sells run
// first (clipped to holdings), then buys in ascending stock order, each
// clipped to remaining cash at the cost-adjusted price.
TradeOutcome execute_trades(const PortfolioState& state, const DirectiveVector& directive,
                            std::span<const double> sizes, const EnvConfig& cfg,
                            std::span<const double> next_prices);

// Integer-share variant used by baselines that size orders directly.
TradeOutcome execute_share_orders(const PortfolioState& state, const DirectiveVector& directive,
                                  std::span<const std::int64_t> desired_shares, const EnvConfig& cfg,
                                  std::span<const double> next_prices);

// --- observations ---

HlcObservation hlc_observe(const SignalPanel& signals, int day);

struct LlcNormalizer {
  std::vector<double> first_open;
  double initial_capital = 1;
  int h_max = 1;
};

LlcObservation llc_observe(const PortfolioState& state, const DirectiveVector& directive,
                           const LlcNormalizer& norm);

// --- day-stepping environment ---

// Steps a portfolio through a MarketFrame one trading day at a time. Fills
// happen at the day-t open; the LLC reward marks the result at the day-(t+1)
// open. The final day only marks value, so an episode over T days has T-1
// steps.
class TradingEnv {
 public:
  TradingEnv(const MarketFrame& frame, const SignalPanel& signals, EnvConfig cfg);

  std::pair<PortfolioState, HlcObservation> reset();  // throws FrameTooShort

  struct StepResult {
    double llc_reward = 0;
    double align_sum = 0;  // sum of per-stock alignment rewards for the directive
    bool done = false;
  };
  StepResult step(const DirectiveVector& directive, std::span<const double> sizes);
  // Variant taking explicit integer share orders (not bounded by h_max).
  StepResult step_shares(const DirectiveVector& directive, std::span<const std::int64_t> desired_shares);

  bool done() const { return state_.day + 1 >= frame_->num_days(); }
  int day() const { return state_.day; }
  int num_stocks() const { return frame_->num_stocks(); }
  const PortfolioState& state() const { return state_; }
  const TradeLog& trade_log() const { return log_; }
  const LlcNormalizer& normalizer() const { return norm_; }

  HlcObservation hlc_observation() const { return hlc_observe(*signals_, state_.day); }
  LlcObservation llc_observation(const DirectiveVector& directive) const {
    return llc_observe(state_, directive, norm_);
  }

  const MarketFrame& frame() const { return *frame_; }
  const SignalPanel& signals() const { return *signals_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  const MarketFrame* frame_;
  const SignalPanel* signals_;
  EnvConfig cfg_;
  PortfolioState state_;
  LlcNormalizer norm_;
  TradeLog log_;
  bool started_ = false;
};

}  // namespace hrt
