#include "hrt/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hrt/error.hpp"
#include "hrt/rng.hpp"

namespace hrt {

namespace {

constexpr int kTradingDaysPerYear = 252;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where, int line_no) {
  double value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw Error(Errc::malformed_row, where + " line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return value;
}

bool valid_iso_date(const std::string& d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (d[i] < '0' || d[i] > '9') return false;
  int month = (d[5] - '0') * 10 + (d[6] - '0');
  int day = (d[8] - '0') * 10 + (d[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void append_number(std::string& out, double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

using TickerSeries = std::map<std::string, OhlcvBar>;  // date -> bar, ordered

void insert_bar(std::map<std::string, TickerSeries>& series, const std::string& ticker, OhlcvBar bar,
                const std::string& where, int line_no) {
  if (!valid_iso_date(bar.date))
    throw Error(Errc::malformed_row, where + " line " + std::to_string(line_no) + ": bad date '" + bar.date + "'");
  if (!bar.valid())
    throw Error(Errc::malformed_row,
                where + " line " + std::to_string(line_no) + ": bar violates OHLCV invariants");
  auto [it, inserted] = series[ticker].emplace(bar.date, std::move(bar));
  if (!inserted)
    throw Error(Errc::malformed_row, where + " line " + std::to_string(line_no) + ": duplicate (" + ticker +
                                         ", " + it->first + ")");
}

void read_long_csv(const std::string& path, std::map<std::string, TickerSeries>& series) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::malformed_row, path + ": empty file");
  if (strip_cr(line) != "date,ticker,open,high,low,close,volume")
    throw Error(Errc::malformed_row, path + " line 1: expected header date,ticker,open,high,low,close,volume");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 7)
      throw Error(Errc::malformed_row, path + " line " + std::to_string(line_no) + ": expected 7 fields");
    OhlcvBar bar{f[0],
                 parse_double(f[2], path, line_no),
                 parse_double(f[3], path, line_no),
                 parse_double(f[4], path, line_no),
                 parse_double(f[5], path, line_no),
                 parse_double(f[6], path, line_no)};
    insert_bar(series, f[1], std::move(bar), path, line_no);
  }
}

void read_per_ticker_csv(const std::string& path, const std::string& ticker,
                         std::map<std::string, TickerSeries>& series) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_ticker, ticker + ": no file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::malformed_row, path + ": empty file");
  if (strip_cr(line) != "date,open,high,low,close,volume")
    throw Error(Errc::malformed_row, path + " line 1: expected header date,open,high,low,close,volume");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 6)
      throw Error(Errc::malformed_row, path + " line " + std::to_string(line_no) + ": expected 6 fields");
    OhlcvBar bar{f[0],
                 parse_double(f[1], path, line_no),
                 parse_double(f[2], path, line_no),
                 parse_double(f[3], path, line_no),
                 parse_double(f[4], path, line_no),
                 parse_double(f[5], path, line_no)};
    insert_bar(series, ticker, std::move(bar), path, line_no);
  }
}

// Next trading day (weekdays only) for synthetic calendars.
std::chrono::sys_days next_trading_day(std::chrono::sys_days d) {
  do {
    d += std::chrono::days(1);
  } while (std::chrono::weekday(d) == std::chrono::Saturday || std::chrono::weekday(d) == std::chrono::Sunday);
  return d;
}

std::string format_date(std::chrono::sys_days d) {
  std::chrono::year_month_day ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

double broadcast(const std::vector<double>& v, int i) { return v.size() == 1 ? v[0] : v[i]; }

}  // namespace

bool OhlcvBar::valid() const {
  for (double p : {open, high, low, close})
    if (!std::isfinite(p) || p <= 0) return false;
  if (!std::isfinite(volume) || volume < 0) return false;
  if (low > std::min(open, close)) return false;
  if (high < std::max(open, close)) return false;
  return true;
}

void SyntheticMarketSpec::validate() const {
  if (n_stocks < 1) throw Error(Errc::invalid_spec, "n_stocks must be >= 1");
  if (n_days < 2) throw Error(Errc::invalid_spec, "n_days must be >= 2");
  auto check_per_stock = [&](const std::vector<double>& v, const char* name, bool positive) {
    if (v.size() != 1 && v.size() != static_cast<std::size_t>(n_stocks))
      throw Error(Errc::invalid_spec, std::string(name) + " needs 1 or n_stocks values");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(Errc::invalid_spec, std::string(name) + " must be finite");
      if (positive && x <= 0) throw Error(Errc::invalid_spec, std::string(name) + " must be > 0");
    }
  };
  check_per_stock(drift, "drift", false);
  check_per_stock(volatility, "volatility", true);
  if (!(signal_quality >= 0.0 && signal_quality <= 1.0))
    throw Error(Errc::invalid_spec, "signal_quality must be in [0, 1]");
}

MarketFrame load_csv(const std::string& path, const std::vector<std::string>& tickers) {
  std::map<std::string, TickerSeries> series;
  std::vector<std::string> wanted = tickers;

  if (std::filesystem::is_directory(path)) {
    if (wanted.empty()) throw Error(Errc::missing_ticker, "directory input requires an explicit ticker list");
    for (const auto& t : wanted) read_per_ticker_csv(path + "/" + t + ".csv", t, series);
  } else {
    read_long_csv(path, series);
    if (wanted.empty())
      for (const auto& [t, _] : series) wanted.push_back(t);  // map order = sorted
  }

  for (const auto& t : wanted)
    if (!series.count(t)) throw Error(Errc::missing_ticker, t + " not present in " + path);
  if (std::set<std::string>(wanted.begin(), wanted.end()).size() != wanted.size())
    throw Error(Errc::malformed_row, "duplicate ticker in request list");

  // Dates present for every requested ticker.
  std::vector<std::string> days;
  for (const auto& [date, _] : series[wanted[0]]) days.push_back(date);
  for (std::size_t i = 1; i < wanted.size(); ++i) {
    const TickerSeries& s = series[wanted[i]];
    std::erase_if(days, [&](const std::string& d) { return !s.count(d); });
  }
  if (days.empty()) throw Error(Errc::empty_intersection, "no date shared by all tickers");

  MarketFrame frame;
  frame.tickers = wanted;
  frame.days = days;
  frame.bars.reserve(wanted.size() * days.size());
  for (const auto& t : wanted)
    for (const auto& d : days) frame.bars.push_back(series[t][d]);
  return frame;
}

void write_csv(const MarketFrame& frame, const std::string& path) {
  std::string out = "date,ticker,open,high,low,close,volume\n";
  for (int i = 0; i < frame.num_stocks(); ++i) {
    for (int t = 0; t < frame.num_days(); ++t) {
      const OhlcvBar& b = frame.bar(i, t);
      out += b.date;
      out += ',';
      out += frame.tickers[i];
      for (double v : {b.open, b.high, b.low, b.close, b.volume}) {
        out += ',';
        append_number(out, v);
      }
      out += '\n';
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot write " + path);
  f << out;
}

MarketFrame compute_vwap(MarketFrame frame) {
  frame.vwap = Grid(frame.num_stocks(), frame.num_days());
  for (int i = 0; i < frame.num_stocks(); ++i)
    for (int t = 0; t < frame.num_days(); ++t) {
      const OhlcvBar& b = frame.bar(i, t);
      frame.vwap.at(i, t) = (b.high + b.low + b.close) / 3.0;
    }
  return frame;
}

double realized_forward_return(const MarketFrame& frame, int stock, int day) {
  if (day + 1 >= frame.num_days())
    throw Error(Errc::last_day, "no forward return on the final day (t=" + std::to_string(day) + ")");
  return frame.open(stock, day + 1) / frame.open(stock, day) - 1.0;
}

std::pair<MarketFrame, SignalPanel> generate_synthetic(const SyntheticMarketSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  const int n = spec.n_stocks;
  const int days = spec.n_days;
  const double rho = spec.signal_quality;
  const double noise_weight = std::sqrt(1.0 - rho * rho);

  MarketFrame frame;
  frame.days.reserve(days);
  std::chrono::sys_days d = std::chrono::year{2020} / 1 / 2;  // Thursday
  for (int t = 0; t < days; ++t) {
    frame.days.push_back(format_date(d));
    d = next_trading_day(d);
  }
  for (int i = 0; i < n; ++i) frame.tickers.push_back("SYN" + std::to_string(i));
  frame.bars.resize(static_cast<std::size_t>(n) * days);

  SignalPanel panel{Grid(n, days), Grid(n, days)};

  for (int i = 0; i < n; ++i) {
    const double sigma_d = broadcast(spec.volatility, i) / std::sqrt(double(kTradingDaysPerYear));
    const double mu_d = (broadcast(spec.drift, i) - 0.5 * broadcast(spec.volatility, i) * broadcast(spec.volatility, i)) /
                        kTradingDaysPerYear;

    std::vector<double> opens(days), shocks(days - 1);
    opens[0] = 100.0;
    for (int t = 0; t + 1 < days; ++t) {
      shocks[t] = rng.normal();
      opens[t + 1] = opens[t] * std::exp(mu_d + sigma_d * shocks[t]);
    }
    const double last_shock = rng.normal();

    for (int t = 0; t < days; ++t) {
      OhlcvBar& b = frame.bar(i, t);
      b.date = frame.days[t];
      b.open = opens[t];
      b.close = (t + 1 < days) ? opens[t + 1] : opens[t] * std::exp(mu_d + sigma_d * last_shock);
      b.high = std::max(b.open, b.close) * std::exp(0.5 * sigma_d * std::fabs(rng.normal()));
      b.low = std::min(b.open, b.close) * std::exp(-0.5 * sigma_d * std::fabs(rng.normal()));
      b.volume = std::round(1e6 * std::exp(0.3 * rng.normal()));
    }

    for (int t = 0; t < days; ++t) {
      // z is the standardized next-day log return; the last day has none, so
      // its signal is pure noise.
      const double z = (t + 1 < days) ? shocks[t] : rng.normal();
      const double fr_std = rho * z + noise_weight * rng.normal();
      panel.fr.at(i, t) = mu_d + sigma_d * fr_std;
      const double ss_raw = std::tanh(fr_std) + 0.25 * rng.normal();
      panel.ss.at(i, t) = std::clamp(ss_raw, -1.0, 1.0);
    }
  }
  return {std::move(frame), std::move(panel)};
}

SignalPanel baseline_signals(const MarketFrame& frame, int lookback) {
  if (lookback < 1) throw Error(Errc::invalid_spec, "lookback must be >= 1");
  const int n = frame.num_stocks();
  const int days = frame.num_days();
  SignalPanel panel{Grid(n, days), Grid(n, days)};
  for (int i = 0; i < n; ++i) {
    for (int t = lookback; t < days; ++t) {
      double sum = 0;
      for (int k = t - lookback + 1; k <= t; ++k) sum += frame.open(i, k) / frame.open(i, k - 1) - 1.0;
      const double fr = sum / lookback;
      panel.fr.at(i, t) = fr;
      // Damped sign: saturates around +-1 once momentum exceeds ~1%/day.
      panel.ss.at(i, t) = std::tanh(fr / 0.01);
    }
  }
  return panel;
}

void write_signals_csv(const SignalPanel& signals, const MarketFrame& frame, const std::string& path) {
  if (signals.fr.rows() != frame.num_stocks() || signals.fr.cols() != frame.num_days())
    throw Error(Errc::dimension_mismatch, "signal panel does not match frame");
  std::string out = "date,ticker,fr,ss\n";
  for (int i = 0; i < frame.num_stocks(); ++i)
    for (int t = 0; t < frame.num_days(); ++t) {
      out += frame.days[t];
      out += ',';
      out += frame.tickers[i];
      out += ',';
      append_number(out, signals.fr.at(i, t));
      out += ',';
      append_number(out, signals.ss.at(i, t));
      out += '\n';
    }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot write " + path);
  f << out;
}

SignalPanel load_signals_csv(const std::string& path, const MarketFrame& frame) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "date,ticker,fr,ss")
    throw Error(Errc::malformed_row, path + " line 1: expected header date,ticker,fr,ss");

  std::map<std::string, int> stock_of;
  for (int i = 0; i < frame.num_stocks(); ++i) stock_of[frame.tickers[i]] = i;
  std::map<std::string, int> day_of;
  for (int t = 0; t < frame.num_days(); ++t) day_of[frame.days[t]] = t;

  SignalPanel panel{Grid(frame.num_stocks(), frame.num_days()), Grid(frame.num_stocks(), frame.num_days())};
  Grid seen(frame.num_stocks(), frame.num_days());

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 4)
      throw Error(Errc::malformed_row, path + " line " + std::to_string(line_no) + ": expected 4 fields");
    auto day_it = day_of.find(f[0]);
    auto stock_it = stock_of.find(f[1]);
    if (day_it == day_of.end() || stock_it == stock_of.end()) continue;  // outside the aligned frame
    const double fr = parse_double(f[2], path, line_no);
    const double ss = parse_double(f[3], path, line_no);
    if (!std::isfinite(fr) || !std::isfinite(ss) || ss < -1.0 || ss > 1.0)
      throw Error(Errc::malformed_row, path + " line " + std::to_string(line_no) + ": signal out of range");
    panel.fr.at(stock_it->second, day_it->second) = fr;
    panel.ss.at(stock_it->second, day_it->second) = ss;
    seen.at(stock_it->second, day_it->second) = 1.0;
  }
  for (int i = 0; i < frame.num_stocks(); ++i)
    for (int t = 0; t < frame.num_days(); ++t)
      if (seen.at(i, t) == 0.0)
        throw Error(Errc::malformed_row,
                    path + ": missing signal for (" + frame.tickers[i] + ", " + frame.days[t] + ")");
  return panel;
}

}  // namespace hrt
