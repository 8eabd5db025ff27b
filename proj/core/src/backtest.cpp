#include "hrt/backtest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "hrt/binio.hpp"
#include "hrt/error.hpp"

namespace hrt {

namespace {

constexpr double kTradingDaysPerYear = 252.0;

std::vector<double> returns_from_values(std::span<const double> values) {
  std::vector<double> r;
  r.reserve(values.size() - 1);
  for (std::size_t t = 0; t + 1 < values.size(); ++t) r.push_back(values[t + 1] / values[t] - 1.0);
  return r;
}

}  // namespace

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::hrt: return "hrt";
    case StrategyKind::ppo_only: return "ppo_only";
    case StrategyKind::ddpg_only: return "ddpg_only";
    case StrategyKind::random: return "random";
    case StrategyKind::buy_and_hold_equal_weight: return "buy_and_hold_equal_weight";
  }
  return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
  for (StrategyKind k : {StrategyKind::hrt, StrategyKind::ppo_only, StrategyKind::ddpg_only, StrategyKind::random,
                         StrategyKind::buy_and_hold_equal_weight})
    if (name == strategy_name(k)) return k;
  throw Error(Errc::config_error, "unknown strategy '" + name + "'");
}

double cumulative_return(std::span<const double> values) {
  if (values.size() < 1 || values.front() <= 0) throw Error(Errc::invalid_spec, "need a positive value series");
  return values.back() / values.front() - 1.0;
}

double annualized_return(double cumulative, double n_years) {
  if (!(n_years > 0)) throw Error(Errc::invalid_spec, "n_years must be > 0");
  return std::pow(1.0 + cumulative, 1.0 / n_years) - 1.0;
}

double annualized_volatility(std::span<const double> daily_returns) {
  const std::size_t n = daily_returns.size();
  if (n < 2) return 0.0;
  double mean = 0;
  for (double r : daily_returns) mean += r;
  mean /= static_cast<double>(n);
  double sq = 0;
  for (double r : daily_returns) sq += (r - mean) * (r - mean);
  return std::sqrt(sq / static_cast<double>(n - 1)) * std::sqrt(kTradingDaysPerYear);
}

double sharpe_ratio(std::span<const double> daily_returns, double risk_free) {
  const double vol = annualized_volatility(daily_returns);
  if (vol == 0.0) throw Error(Errc::zero_volatility, "flat return series has no Sharpe ratio");
  double cumulative = 1.0;
  for (double r : daily_returns) cumulative *= 1.0 + r;
  const double n_years = static_cast<double>(daily_returns.size() + 1) / kTradingDaysPerYear;
  return (annualized_return(cumulative - 1.0, n_years) - risk_free) / vol;
}

double max_drawdown(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::invalid_spec, "empty value series");
  double peak = values[0];
  double worst = 0;
  for (double v : values) {
    peak = std::max(peak, v);
    worst = std::min(worst, v / peak - 1.0);
  }
  return worst;
}

void compute_metrics(BacktestReport& report) {
  report.daily_returns = returns_from_values(report.daily_values);
  report.cumulative_return = cumulative_return(report.daily_values);
  const double n_years = static_cast<double>(report.daily_values.size()) / kTradingDaysPerYear;
  report.annualized_return = annualized_return(report.cumulative_return, n_years);
  report.annualized_volatility = annualized_volatility(report.daily_returns);
  try {
    report.sharpe_ratio = sharpe_ratio(report.daily_returns);
  } catch (const Error& e) {
    if (e.code() != Errc::zero_volatility) throw;
    report.sharpe_ratio.reset();
  }
  report.max_drawdown = max_drawdown(report.daily_values);
}

BacktestReport run_backtest(StrategyKind kind, const StrategyPolicies& policies, const MarketFrame& frame,
                            const SignalPanel& signals, const EnvConfig& cfg, std::uint64_t seed) {
  if ((kind == StrategyKind::hrt || kind == StrategyKind::ppo_only) && policies.hlc == nullptr)
    throw Error(Errc::dimension_mismatch, std::string(strategy_name(kind)) + " needs an HLC checkpoint");
  if ((kind == StrategyKind::hrt || kind == StrategyKind::ddpg_only) && policies.llc == nullptr)
    throw Error(Errc::dimension_mismatch, std::string(strategy_name(kind)) + " needs an LLC checkpoint");

  const int n = frame.num_stocks();
  if (policies.hlc && policies.hlc->num_stocks() != n)
    throw Error(Errc::dimension_mismatch, "HLC checkpoint was trained for a different stock count");
  if (policies.llc && (policies.llc->n_stocks() != n || policies.llc->obs_size() != 3 * n + 1))
    throw Error(Errc::dimension_mismatch, "LLC checkpoint was trained for a different stock count");

  TradingEnv env(frame, signals, cfg);
  env.reset();
  Rng rng(derive_seed(seed, 17));

  BacktestReport report;
  report.strategy = strategy_name(kind);
  report.seed = seed;
  report.initial_capital = cfg.initial_capital;
  report.daily_values.reserve(frame.num_days());
  report.daily_values.push_back(env.state().value());

  const DirectiveVector all_hold(n);
  std::vector<double> zero_sizes(n, 0.0);

  while (!env.done()) {
    DirectiveVector directive(n);
    std::vector<double> sizes(n, 0.0);

    switch (kind) {
      case StrategyKind::hrt: {
        directive = policies.hlc->greedy_directive(env.hlc_observation());
        sizes = policies.llc->act_greedy(env.llc_observation(directive).values);
        break;
      }
      case StrategyKind::ppo_only: {
        // Direction policy alone: full-size orders.
        directive = policies.hlc->greedy_directive(env.hlc_observation());
        std::fill(sizes.begin(), sizes.end(), 1.0);
        break;
      }
      case StrategyKind::ddpg_only: {
        // Flat agent: signed magnitudes, sign picks the direction. The
        // observation carries a zero directive block.
        const std::vector<double> a = policies.llc->act_greedy(env.llc_observation(all_hold).values);
        for (int i = 0; i < n; ++i) {
          const auto shares = std::llround(std::fabs(a[i]) * cfg.h_max);
          directive[i] = shares == 0 ? 0 : (a[i] > 0 ? 1 : -1);
          sizes[i] = std::fabs(a[i]);
        }
        break;
      }
      case StrategyKind::random: {
        for (int i = 0; i < n; ++i) {
          directive[i] = static_cast<int>(rng.uniform_index(3)) - 1;
          sizes[i] = rng.uniform();
        }
        break;
      }
      case StrategyKind::buy_and_hold_equal_weight: {
        if (env.day() == 0) {
          // Spend the initial capital equally across stocks on day 0, hold
          // for the rest of the window. Integer share orders, not h_max-bound.
          std::vector<std::int64_t> shares(n);
          const double budget = cfg.initial_capital / n;
          for (int i = 0; i < n; ++i) {
            directive[i] = 1;
            shares[i] = static_cast<std::int64_t>(
                std::floor(budget / ((1.0 + cfg.cost_rate) * env.state().prices[i])));
          }
          env.step_shares(directive, shares);
          report.daily_values.push_back(env.state().value());
          continue;
        }
        break;
      }
    }

    env.step(directive, sizes);
    report.daily_values.push_back(env.state().value());
  }

  report.trade_log = env.trade_log();
  compute_metrics(report);
  return report;
}

void export_heatmap_csv(const TradeLog& log, int h_max, std::span<const std::string> tickers, int n_days,
                        const std::string& path) {
  Grid shares(static_cast<int>(tickers.size()), n_days);
  for (const TradeRecord& tr : log) {
    const double clipped = std::clamp<double>(static_cast<double>(tr.shares), -h_max, h_max);
    shares.at(tr.stock, tr.day) += clipped;
  }
  std::string out = "ticker,day,log_signed_volume\n";
  char buf[32];
  for (int i = 0; i < shares.rows(); ++i)
    for (int t = 0; t < n_days; ++t) {
      const double s = std::clamp<double>(shares.at(i, t), -h_max, h_max);
      const double v = (s >= 0 ? 1.0 : -1.0) * std::log1p(std::fabs(s));
      out += tickers[i];
      out += ',';
      out += std::to_string(t);
      out += ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out.append(buf, p);
      out += '\n';
    }
  write_file_bytes(path, out);
}

std::vector<std::pair<std::string, double>> sector_volume_proportions(
    const TradeLog& log, std::span<const std::string> tickers,
    const std::map<std::string, std::string>& sector_of) {
  std::map<std::string, double> notional;
  double total = 0;
  for (const TradeRecord& tr : log) {
    const std::string& ticker = tickers[tr.stock];
    auto it = sector_of.find(ticker);
    if (it == sector_of.end()) throw Error(Errc::unmapped_ticker, ticker + " has no sector mapping");
    const double value = std::fabs(static_cast<double>(tr.shares) * tr.price);
    notional[it->second] += value;
    total += value;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [sector, value] : notional) out.emplace_back(sector, total > 0 ? value / total : 0.0);
  return out;
}

std::map<std::string, std::string> load_sector_map_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::malformed_row, path + ": empty file");
  std::map<std::string, std::string> out;
  int line_no = 1;
  if (line != "ticker,sector" && !line.starts_with("ticker,sector"))
    throw Error(Errc::malformed_row, path + " line 1: expected header ticker,sector");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(Errc::malformed_row, path + " line " + std::to_string(line_no) + ": expected 2 fields");
    out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

void write_report_json(const BacktestReport& report, const EnvConfig& cfg, const std::string& path) {
  nlohmann::json j;
  j["strategy"] = report.strategy;
  j["seed"] = report.seed;
  j["initial_capital"] = report.initial_capital;
  j["metrics"]["cumulative_return"] = report.cumulative_return;
  j["metrics"]["annualized_return"] = report.annualized_return;
  j["metrics"]["annualized_volatility"] = report.annualized_volatility;
  if (report.sharpe_ratio)
    j["metrics"]["sharpe_ratio"] = *report.sharpe_ratio;
  else
    j["metrics"]["sharpe_ratio"] = nullptr;
  j["metrics"]["max_drawdown"] = report.max_drawdown;
  j["env"]["initial_capital"] = cfg.initial_capital;
  j["env"]["cost_rate"] = cfg.cost_rate;
  j["env"]["h_max"] = cfg.h_max;
  j["env"]["reward_scale"] = cfg.reward_scale;
  j["daily_values"] = report.daily_values;
  j["n_trades"] = report.trade_log.size();
  write_file_bytes(path, j.dump(2) + "\n");
}

void write_daily_values_csv(const BacktestReport& report, const std::string& path) {
  std::string out = "day,value,daily_return\n";
  char buf[32];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, p);
  };
  for (std::size_t t = 0; t < report.daily_values.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    num(report.daily_values[t]);
    out += ',';
    if (t == 0)
      out += "0";
    else
      num(report.daily_returns[t - 1]);
    out += '\n';
  }
  write_file_bytes(path, out);
}

BacktestReport load_report_json(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file_bytes(path));
  BacktestReport report;
  report.strategy = j.at("strategy").get<std::string>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.initial_capital = j.at("initial_capital").get<double>();
  report.daily_values = j.at("daily_values").get<std::vector<double>>();
  report.cumulative_return = j.at("metrics").at("cumulative_return").get<double>();
  report.annualized_return = j.at("metrics").at("annualized_return").get<double>();
  report.annualized_volatility = j.at("metrics").at("annualized_volatility").get<double>();
  if (!j.at("metrics").at("sharpe_ratio").is_null())
    report.sharpe_ratio = j.at("metrics").at("sharpe_ratio").get<double>();
  report.max_drawdown = j.at("metrics").at("max_drawdown").get<double>();
  report.daily_returns = returns_from_values(report.daily_values);
  return report;
}

}  // namespace hrt
