#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "hrt/ddpg.hpp"
#include "hrt/market_data.hpp"
#include "hrt/ppo.hpp"
#include "hrt/trading_env.hpp"
#include "hrt/trainer.hpp"

namespace hrt {

// Minimal TOML-style document: [section] headers, key = value lines, where a
// value is a quoted string, integer, float, boolean, or a single-line array
// of those. `#` starts a comment outside strings.
struct TomlValue {
  std::variant<bool, std::int64_t, double, std::string, std::vector<TomlValue>> v;

  bool as_bool(const std::string& key) const;
  std::int64_t as_int(const std::string& key) const;
  double as_double(const std::string& key) const;  // accepts integers
  const std::string& as_string(const std::string& key) const;
  const std::vector<TomlValue>& as_array(const std::string& key) const;
};

using TomlTable = std::map<std::string, TomlValue>;

struct TomlDoc {
  TomlTable root;                            // keys before the first section
  std::map<std::string, TomlTable> sections;

  bool has(const std::string& section, const std::string& key) const;
  const TomlValue& get(const std::string& section, const std::string& key) const;
};

TomlDoc parse_toml(const std::string& text);
TomlDoc parse_toml_file(const std::string& path);

// --- run configuration ---

struct DataConfig {
  std::string source = "synthetic";   // "synthetic" | "csv"
  std::string csv_path;               // long CSV or per-ticker directory
  std::vector<std::string> tickers;   // optional restriction / ordering
  std::string signals = "";           // "" = default for source, else "baseline" | "csv"
  std::string signals_csv;
  int lookback = 10;                  // baseline provider window
};

struct RunSection {
  std::string out_dir = "runs/out";
  std::vector<std::uint64_t> seeds = {1};
};

struct RunConfig {
  DataConfig data;
  SyntheticMarketSpec synthetic;
  EnvConfig env;
  PpoConfig ppo;
  DdpgConfig ddpg;
  TrainSchedule schedule;
  std::string train_strategy = "hrt";  // "hrt" | "ddpg_only"
  RunSection run;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_doc(const TomlDoc& doc);

  // Throws ConfigError naming the offending field. check_paths additionally
  // requires referenced input files to exist.
  void validate(bool check_paths) const;

  // Full round-trippable echo with every default expanded.
  std::string resolved_toml() const;
};

// Materializes the configured market: synthetic generation or CSV load plus
// the configured signal provider.
std::pair<MarketFrame, SignalPanel> load_market(const RunConfig& cfg);

}  // namespace hrt
