#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hrt/backtest.hpp"
#include "hrt/config.hpp"

namespace hrt {

// Library-level command implementations behind the CLI subcommands. All paths
// are created as needed; every function validates before doing work.

// Writes market.csv and signals.csv generated from the [synthetic] section.
void cmd_synth(const RunConfig& cfg, const std::string& out_dir);

// Trains one run per seed under <out_dir>/seed_<s>/, writing the resolved
// config snapshot, JSON-lines logs and checkpoints. With resume = true,
// continues each unfinished run from its checkpoint_last.bin.
void cmd_train(RunConfig cfg, const std::string& out_dir, bool resume = false);

struct BacktestArtifacts {
  BacktestReport report;
  std::string report_json;
  std::string daily_csv;
  std::string trades_csv;
  std::string heatmap_csv;
  std::string sectors_csv;  // empty unless a sector map was supplied
};

// Runs one greedy backtest and writes report.json, daily_values.csv,
// trade_log.csv and heatmap.csv under out_dir. checkpoint_path may be empty
// for the random and buy-and-hold baselines.
BacktestArtifacts cmd_backtest(const RunConfig& cfg, const std::string& checkpoint_path,
                               const std::string& strategy, const std::string& out_dir,
                               const std::string& sector_map_path = "", std::uint64_t seed = 0);

struct AggregateRow {
  std::string strategy;
  int n_runs = 0;
  // mean / sample stddev per metric
  double cumulative_mean = 0, cumulative_std = 0;
  double annualized_mean = 0, annualized_std = 0;
  double volatility_mean = 0, volatility_std = 0;
  double sharpe_mean = 0, sharpe_std = 0;
  int sharpe_defined = 0;  // runs with a defined Sharpe ratio
  double drawdown_mean = 0, drawdown_std = 0;
};

// Scans run directories for report.json files, groups them by strategy and
// reduces each metric to mean +/- sample standard deviation. Writes
// summary.csv (metric rows x strategy columns) and summary.json to out_dir
// when non-empty.
std::vector<AggregateRow> cmd_aggregate(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace hrt
