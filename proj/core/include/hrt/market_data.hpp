#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hrt/grid.hpp"

namespace hrt {

// One daily bar. Prices in currency units, volume in shares.
struct OhlcvBar {
  std::string date;  // ISO-8601 calendar day
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double volume = 0;

  // low <= min(open, close), high >= max(open, close), prices finite and > 0,
  // volume >= 0.
  bool valid() const;

  bool operator==(const OhlcvBar& other) const = default;
};

// Aligned per-day OHLCV panel for N tickers over T days. The grid is complete:
// every (ticker, day) cell holds a bar. vwap stays empty until compute_vwap.
struct MarketFrame {
  std::vector<std::string> tickers;
  std::vector<std::string> days;
  std::vector<OhlcvBar> bars;  // row-major [ticker][day]
  Grid vwap;

  int num_stocks() const { return static_cast<int>(tickers.size()); }
  int num_days() const { return static_cast<int>(days.size()); }

  const OhlcvBar& bar(int stock, int day) const {
    return bars[static_cast<std::size_t>(stock) * days.size() + day];
  }
  OhlcvBar& bar(int stock, int day) { return bars[static_cast<std::size_t>(stock) * days.size() + day]; }

  double open(int stock, int day) const { return bar(stock, day).open; }

  bool operator==(const MarketFrame& other) const = default;
};

// HLC state signals: predicted forward return (fraction) and sentiment score
// in [-1, 1], both N x T matching a MarketFrame.
struct SignalPanel {
  Grid fr;
  Grid ss;

  bool operator==(const SignalPanel& other) const = default;
};

// Synthetic multi-stock market: per-stock GBM price paths plus an emitted
// forward-return signal whose correlation with the realized next-day return
// is signal_quality. drift/volatility are annualized; give either one value
// (broadcast) or one per stock.
struct SyntheticMarketSpec {
  int n_stocks = 1;
  int n_days = 2;
  std::uint64_t seed = 0;
  std::vector<double> drift = {0.05};
  std::vector<double> volatility = {0.2};
  double signal_quality = 1.0;  // rho in [0, 1]

  void validate() const;  // throws InvalidSpec
};

// --- ingestion ---

// Reads market data and aligns tickers on the intersection of their date
// sets. `path` is either a long-format CSV (header
// date,ticker,open,high,low,close,volume) or a directory holding one
// <TICKER>.csv per ticker (header date,open,high,low,close,volume).
// An empty ticker list selects every ticker found (sorted), long format only.
MarketFrame load_csv(const std::string& path, const std::vector<std::string>& tickers);

// Writes a frame in the long CSV format. Values are emitted with enough
// digits that a reload reproduces the frame exactly.
void write_csv(const MarketFrame& frame, const std::string& path);

// Fills frame.vwap with the typical price (high + low + close) / 3.
MarketFrame compute_vwap(MarketFrame frame);

// Next-day open-to-open fractional change. Throws LastDay for the final day.
double realized_forward_return(const MarketFrame& frame, int stock, int day);

// --- signal providers ---

// Seeded GBM market plus planted signals. Pure function of spec.
std::pair<MarketFrame, SignalPanel> generate_synthetic(const SyntheticMarketSpec& spec);

// Momentum baseline: fr = rolling mean of the last `lookback` open-to-open
// returns, ss = damped sign of fr. The first `lookback` days are zero.
SignalPanel baseline_signals(const MarketFrame& frame, int lookback = 10);

// Signal CSV (header date,ticker,fr,ss), aligned to an existing frame on load.
void write_signals_csv(const SignalPanel& signals, const MarketFrame& frame, const std::string& path);
SignalPanel load_signals_csv(const std::string& path, const MarketFrame& frame);

}  // namespace hrt
