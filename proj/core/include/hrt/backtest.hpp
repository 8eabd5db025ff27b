#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrt/ddpg.hpp"
#include "hrt/ppo.hpp"
#include "hrt/trading_env.hpp"

namespace hrt {

enum class StrategyKind {
  hrt,
  ppo_only,
  ddpg_only,
  random,
  buy_and_hold_equal_weight,
};

const char* strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

struct BacktestReport {
  std::string strategy;
  std::uint64_t seed = 0;
  double initial_capital = 0;
  std::vector<double> daily_values;   // T entries, [0] = initial capital
  std::vector<double> daily_returns;  // T-1 entries
  double cumulative_return = 0;
  double annualized_return = 0;
  double annualized_volatility = 0;
  std::optional<double> sharpe_ratio;  // empty when volatility is zero
  double max_drawdown = 0;
  TradeLog trade_log;
};

// --- metrics (pure functions of the series) ---

// V_T / V_0 - 1 (compounded).
double cumulative_return(std::span<const double> values);

// (1 + cumulative)^(1/n_years) - 1.
double annualized_return(double cumulative, double n_years);

// Sample standard deviation of daily returns, scaled by sqrt(252).
double annualized_volatility(std::span<const double> daily_returns);

// Annualized return over annualized volatility, risk-free rate 0. The year
// count uses the 252-trading-day convention on returns.size() + 1 days.
// Throws ZeroVolatility when the volatility is zero.
double sharpe_ratio(std::span<const double> daily_returns, double risk_free = 0.0);

// min over t of values[t] / max(values[0..t]) - 1, in (-1, 0].
double max_drawdown(std::span<const double> values);

// fills the metric fields of a report from its daily_values.
void compute_metrics(BacktestReport& report);

// --- running a strategy ---

struct StrategyPolicies {
  const PpoAgent* hlc = nullptr;   // required for hrt / ppo_only
  const DdpgAgent* llc = nullptr;  // required for hrt / ddpg_only
};

// Greedy (noise-free) day-by-day execution of a strategy over the frame.
// `seed` drives the random strategy only.
BacktestReport run_backtest(StrategyKind kind, const StrategyPolicies& policies, const MarketFrame& frame,
                            const SignalPanel& signals, const EnvConfig& cfg, std::uint64_t seed = 0);

// --- exports ---

// Full N x T grid of sign(shares) * ln(1 + |shares|), shares clipped to
// h_max. CSV header ticker,day,log_signed_volume; day is the day index.
void export_heatmap_csv(const TradeLog& log, int h_max, std::span<const std::string> tickers, int n_days,
                        const std::string& path);

// Traded notional |shares * price| grouped by sector and normalized to sum 1.
// Deterministic (sorted) sector order.
std::vector<std::pair<std::string, double>> sector_volume_proportions(
    const TradeLog& log, std::span<const std::string> tickers,
    const std::map<std::string, std::string>& sector_of);

std::map<std::string, std::string> load_sector_map_csv(const std::string& path);

// Report serialization: metrics JSON (+ config echo) and daily series CSV.
void write_report_json(const BacktestReport& report, const EnvConfig& cfg, const std::string& path);
void write_daily_values_csv(const BacktestReport& report, const std::string& path);
BacktestReport load_report_json(const std::string& path);

}  // namespace hrt
