#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hrt/commands.hpp"
#include "hrt/error.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

hrt::RunConfig load_config(const std::string& path, std::uint64_t seed_override, bool has_seed) {
  hrt::RunConfig cfg = hrt::RunConfig::from_file(path);
  if (has_seed) {
    cfg.run.seeds = {seed_override};
    cfg.schedule.seed = seed_override;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hrt - hierarchical two-level trading engine (train, backtest, analyze)"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, strategy = "hrt", sector_map;
  std::uint64_t seed = 0;
  bool resume = false;
  std::vector<std::string> run_dirs;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic market and signal CSVs");
  synth->add_option("--config", config_path, "config file (TOML)")->required();
  synth->add_option("--out", out_dir, "output directory");

  CLI::App* train = app.add_subcommand("train", "run phased alternating training");
  train->add_option("--config", config_path, "config file (TOML)")->required();
  train->add_option("--out", out_dir, "output directory (default: run.out_dir)");
  CLI::Option* train_seed = train->add_option("--seed", seed, "override the seed list with one seed");
  train->add_flag("--resume", resume, "continue from checkpoint_last.bin in each seed directory");

  CLI::App* backtest = app.add_subcommand("backtest", "evaluate a strategy on the configured market");
  backtest->add_option("--config", config_path, "config file (TOML)")->required();
  backtest->add_option("--checkpoint", checkpoint_path, "trained checkpoint (.bin)");
  backtest->add_option("--strategy", strategy,
                       "hrt | ppo_only | ddpg_only | random | buy_and_hold_equal_weight");
  backtest->add_option("--out", out_dir, "output directory");
  backtest->add_option("--sector-map", sector_map, "ticker,sector CSV for sector proportions");
  CLI::Option* bt_seed = backtest->add_option("--seed", seed, "seed for the random baseline");

  CLI::App* aggregate = app.add_subcommand("aggregate", "mean +/- std of metrics across run directories");
  aggregate->add_option("dirs", run_dirs, "run directories or report.json files")->required();
  aggregate->add_option("--out", out_dir, "output directory for summary.csv/json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const hrt::RunConfig cfg = load_config(config_path, seed, false);
      cmd_synth(cfg, out_dir.empty() ? cfg.run.out_dir : out_dir);
      std::printf("wrote market.csv and signals.csv\n");
    } else if (train->parsed()) {
      const hrt::RunConfig cfg = load_config(config_path, seed, !train_seed->empty());
      cmd_train(cfg, out_dir, resume);
      std::printf("training complete\n");
    } else if (backtest->parsed()) {
      const hrt::RunConfig cfg = load_config(config_path, seed, false);
      const std::string dest =
          out_dir.empty() ? (cfg.run.out_dir + "/backtest_" + strategy) : out_dir;
      const hrt::BacktestArtifacts art =
          cmd_backtest(cfg, checkpoint_path, strategy, dest, sector_map, bt_seed->empty() ? 0 : seed);
      std::printf("strategy=%s cumulative_return=%.6f sharpe=%s max_drawdown=%.6f\n",
                  art.report.strategy.c_str(), art.report.cumulative_return,
                  art.report.sharpe_ratio ? std::to_string(*art.report.sharpe_ratio).c_str() : "undefined",
                  art.report.max_drawdown);
      std::printf("report: %s\n", art.report_json.c_str());
    } else if (aggregate->parsed()) {
      const auto rows = hrt::cmd_aggregate(run_dirs, out_dir);
      for (const hrt::AggregateRow& r : rows)
        std::printf("%-26s runs=%d sharpe=%.4f +/- %.4f cumret=%.4f +/- %.4f\n", r.strategy.c_str(),
                    r.n_runs, r.sharpe_mean, r.sharpe_std, r.cumulative_mean, r.cumulative_std);
    }
  } catch (const hrt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const bool validation = e.code() == hrt::Errc::config_error || e.code() == hrt::Errc::invalid_spec;
    return validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
