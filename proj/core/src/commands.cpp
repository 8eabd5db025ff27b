#include "hrt/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "hrt/binio.hpp"
#include "hrt/error.hpp"
#include "hrt/trainer.hpp"

namespace fs = std::filesystem;

namespace hrt {

namespace {

void write_text(const std::string& path, const std::string& text) { write_file_bytes(path, text); }

struct MeanStd {
  double mean = 0, std = 0;
  int n = 0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.n = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= xs.size();
  if (xs.size() > 1) {
    double sq = 0;
    for (double x : xs) sq += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(sq / (xs.size() - 1));  // sample (n-1) convention
  }
  return r;
}

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, p};
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate(false);
  if (cfg.data.source != "synthetic")
    throw Error(Errc::config_error, "synth needs data.source = \"synthetic\"");
  fs::create_directories(out_dir);
  auto [frame, signals] = generate_synthetic(cfg.synthetic);
  write_csv(frame, out_dir + "/market.csv");
  write_signals_csv(signals, frame, out_dir + "/signals.csv");
}

void cmd_train(RunConfig cfg, const std::string& out_dir, bool resume) {
  cfg.validate(true);
  const std::string base = out_dir.empty() ? cfg.run.out_dir : out_dir;
  auto [frame, signals] = load_market(cfg);

  for (std::uint64_t seed : cfg.run.seeds) {
    RunConfig seeded = cfg;
    seeded.schedule.seed = seed;
    seeded.run.seeds = {seed};
    const std::string run_dir = base + "/seed_" + std::to_string(seed);
    fs::create_directories(run_dir);
    write_text(run_dir + "/config_resolved.toml", seeded.resolved_toml());

    HrtTrainer trainer(frame, signals, seeded.env, seeded.ppo, seeded.ddpg, seeded.schedule,
                       strategy_from_name(seeded.train_strategy), run_dir);
    const std::string last = run_dir + "/checkpoint_last.bin";
    if (resume && fs::exists(last)) {
      const HrtCheckpoint ckpt = load_checkpoint(last);
      trainer.restore(ckpt);
      if (trainer.phase() >= 4) continue;  // already finished
    }
    trainer.train();
  }
}

BacktestArtifacts cmd_backtest(const RunConfig& cfg, const std::string& checkpoint_path,
                               const std::string& strategy, const std::string& out_dir,
                               const std::string& sector_map_path, std::uint64_t seed) {
  cfg.validate(true);
  const StrategyKind kind = strategy_from_name(strategy);
  const bool needs_checkpoint = kind == StrategyKind::hrt || kind == StrategyKind::ppo_only ||
                                kind == StrategyKind::ddpg_only;
  if (needs_checkpoint && checkpoint_path.empty())
    throw Error(Errc::config_error, strategy + " requires --checkpoint");

  auto [frame, signals] = load_market(cfg);

  std::optional<HrtCheckpoint> ckpt;
  std::optional<PpoAgent> hlc;
  std::optional<DdpgAgent> llc;
  StrategyPolicies policies;
  if (needs_checkpoint) {
    ckpt = load_checkpoint(checkpoint_path);
    if (kind == StrategyKind::ddpg_only && ckpt->strategy != "ddpg_only")
      throw Error(Errc::config_error, "checkpoint was trained as '" + ckpt->strategy +
                                          "', not ddpg_only");
    if (kind != StrategyKind::ddpg_only && ckpt->strategy == "ddpg_only")
      throw Error(Errc::config_error, "ddpg_only checkpoint cannot drive strategy '" + strategy + "'");
    hlc.emplace(make_ppo_agent(*ckpt));
    llc.emplace(make_ddpg_agent(*ckpt));
    policies.hlc = &*hlc;
    policies.llc = &*llc;
  }

  fs::create_directories(out_dir);
  BacktestArtifacts art;
  art.report = run_backtest(kind, policies, frame, signals, cfg.env, seed);

  art.report_json = out_dir + "/report.json";
  art.daily_csv = out_dir + "/daily_values.csv";
  art.trades_csv = out_dir + "/trade_log.csv";
  art.heatmap_csv = out_dir + "/heatmap.csv";
  write_report_json(art.report, cfg.env, art.report_json);
  write_daily_values_csv(art.report, art.daily_csv);
  write_trade_log_csv(art.report.trade_log, frame.tickers, art.trades_csv);
  export_heatmap_csv(art.report.trade_log, cfg.env.h_max, frame.tickers, frame.num_days(), art.heatmap_csv);

  if (!sector_map_path.empty()) {
    const auto sector_map = load_sector_map_csv(sector_map_path);
    const auto proportions = sector_volume_proportions(art.report.trade_log, frame.tickers, sector_map);
    std::string out = "sector,proportion\n";
    for (const auto& [sector, p] : proportions) out += sector + "," + fmt(p) + "\n";
    art.sectors_csv = out_dir + "/sector_proportions.csv";
    write_text(art.sectors_csv, out);
  }
  return art;
}

std::vector<AggregateRow> cmd_aggregate(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw Error(Errc::config_error, "aggregate needs at least one run directory");

  std::map<std::string, std::vector<BacktestReport>> by_strategy;
  for (const std::string& dir : run_dirs) {
    if (!fs::exists(dir)) throw Error(Errc::config_error, "run directory does not exist: " + dir);
    if (fs::is_regular_file(dir)) {
      const BacktestReport r = load_report_json(dir);
      by_strategy[r.strategy].push_back(r);
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "report.json") {
        const BacktestReport r = load_report_json(entry.path().string());
        by_strategy[r.strategy].push_back(r);
      }
    }
  }
  if (by_strategy.empty()) throw Error(Errc::config_error, "no report.json found under the given directories");

  std::vector<AggregateRow> rows;
  for (const auto& [strategy, reports] : by_strategy) {
    AggregateRow row;
    row.strategy = strategy;
    row.n_runs = static_cast<int>(reports.size());
    std::vector<double> cum, ann, vol, sharpe, dd;
    for (const BacktestReport& r : reports) {
      cum.push_back(r.cumulative_return);
      ann.push_back(r.annualized_return);
      vol.push_back(r.annualized_volatility);
      if (r.sharpe_ratio) sharpe.push_back(*r.sharpe_ratio);
      dd.push_back(r.max_drawdown);
    }
    auto c = mean_std(cum), a = mean_std(ann), v = mean_std(vol), s = mean_std(sharpe), d = mean_std(dd);
    row.cumulative_mean = c.mean;
    row.cumulative_std = c.std;
    row.annualized_mean = a.mean;
    row.annualized_std = a.std;
    row.volatility_mean = v.mean;
    row.volatility_std = v.std;
    row.sharpe_mean = s.mean;
    row.sharpe_std = s.std;
    row.sharpe_defined = s.n;
    row.drawdown_mean = d.mean;
    row.drawdown_std = d.std;
    rows.push_back(row);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);

    // Table layout: metric rows, one mean/std column pair per strategy.
    std::string csv = "metric";
    for (const AggregateRow& r : rows) csv += "," + r.strategy + "_mean," + r.strategy + "_std";
    csv += "\n";
    auto add_metric = [&](const char* name, auto mean_of, auto std_of) {
      csv += name;
      for (const AggregateRow& r : rows) csv += "," + fmt(mean_of(r)) + "," + fmt(std_of(r));
      csv += "\n";
    };
    add_metric(
        "cumulative_return", [](const AggregateRow& r) { return r.cumulative_mean; },
        [](const AggregateRow& r) { return r.cumulative_std; });
    add_metric(
        "annualized_return", [](const AggregateRow& r) { return r.annualized_mean; },
        [](const AggregateRow& r) { return r.annualized_std; });
    add_metric(
        "annualized_volatility", [](const AggregateRow& r) { return r.volatility_mean; },
        [](const AggregateRow& r) { return r.volatility_std; });
    add_metric(
        "sharpe_ratio", [](const AggregateRow& r) { return r.sharpe_mean; },
        [](const AggregateRow& r) { return r.sharpe_std; });
    add_metric(
        "max_drawdown", [](const AggregateRow& r) { return r.drawdown_mean; },
        [](const AggregateRow& r) { return r.drawdown_std; });
    write_text(out_dir + "/summary.csv", csv);

    nlohmann::json j;
    for (const AggregateRow& r : rows) {
      nlohmann::json s;
      s["n_runs"] = r.n_runs;
      s["cumulative_return"] = {{"mean", r.cumulative_mean}, {"std", r.cumulative_std}};
      s["annualized_return"] = {{"mean", r.annualized_mean}, {"std", r.annualized_std}};
      s["annualized_volatility"] = {{"mean", r.volatility_mean}, {"std", r.volatility_std}};
      s["sharpe_ratio"] = {{"mean", r.sharpe_mean}, {"std", r.sharpe_std}, {"defined", r.sharpe_defined}};
      s["max_drawdown"] = {{"mean", r.drawdown_mean}, {"std", r.drawdown_std}};
      j[r.strategy] = s;
    }
    write_text(out_dir + "/summary.json", j.dump(2) + "\n");
  }
  return rows;
}

}  // namespace hrt
