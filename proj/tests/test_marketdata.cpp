#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hrt/error.hpp"
#include "hrt/market_data.hpp"
#include "hrt/rng.hpp"

using namespace hrt;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

// Minimal independent re-parse of the long CSV used as an oracle: returns the
// raw fields of the row matching (date, ticker).
std::vector<std::string> find_row(const std::string& path, const std::string& date, const std::string& ticker) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() == 7 && fields[0] == date && fields[1] == ticker) return fields;
  }
  return {};
}

}  // namespace

TEST_CASE("load_csv aligns on the date intersection") {
  const std::string path = temp_path("md_intersect.csv");
  write_text(path,
             "date,ticker,open,high,low,close,volume\n"
             "2021-01-04,AAA,10,11,9,10.5,100\n"
             "2021-01-05,AAA,10.5,11,10,10.6,100\n"
             "2021-01-06,AAA,10.6,11,10,10.7,100\n"
             "2021-01-05,BBB,20,21,19,20.5,200\n"
             "2021-01-06,BBB,20.5,21,20,20.6,200\n"
             "2021-01-07,BBB,20.6,21,20,20.7,200\n");
  const MarketFrame frame = load_csv(path, {"AAA", "BBB"});
  CHECK(frame.days == std::vector<std::string>{"2021-01-05", "2021-01-06"});
  CHECK(frame.num_stocks() == 2);
  CHECK(frame.bar(0, 0).open == doctest::Approx(10.5));
  CHECK(frame.bar(1, 1).open == doctest::Approx(20.5));
}

TEST_CASE("load_csv rejects a row with low > high, reporting the line") {
  const std::string path = temp_path("md_badrow.csv");
  write_text(path,
             "date,ticker,open,high,low,close,volume\n"
             "2021-01-04,AAA,10,11,9,10.5,100\n"
             "2021-01-05,AAA,10,9,11,10,100\n");
  try {
    load_csv(path, {"AAA"});
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_row);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("load_csv error paths") {
  const std::string path = temp_path("md_errors.csv");
  write_text(path,
             "date,ticker,open,high,low,close,volume\n"
             "2021-01-04,AAA,10,11,9,10.5,100\n"
             "2021-01-05,BBB,20,21,19,20.5,200\n");
  try {
    load_csv(path, {"CCC"});
    FAIL("expected MissingTicker");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_ticker);
    CHECK(std::string(e.what()).find("CCC") != std::string::npos);
  }
  try {
    load_csv(path, {"AAA", "BBB"});  // no shared dates
    FAIL("expected EmptyIntersection");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_intersection);
  }

  write_text(path,
             "date,ticker,open,high,low,close,volume\n"
             "2021-01-04,AAA,10,11,9,10.5,100\n"
             "2021-01-04,AAA,10,11,9,10.5,100\n");
  CHECK_THROWS_AS(load_csv(path, {"AAA"}), Error);  // duplicate cell

  write_text(path, "date,ticker,open,high,low,close,volume\n2021-01-04,AAA,10,11,nine,10.5,100\n");
  CHECK_THROWS_AS(load_csv(path, {"AAA"}), Error);
}

TEST_CASE("load_csv round-trips a 30-ticker 504-day panel") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 30;
  spec.n_days = 504;
  spec.seed = 11;
  const auto [frame, panel] = generate_synthetic(spec);

  const std::string path = temp_path("md_roundtrip.csv");
  write_csv(frame, path);
  const MarketFrame loaded = load_csv(path, frame.tickers);
  REQUIRE(loaded.num_stocks() == 30);
  REQUIRE(loaded.num_days() == 504);
  CHECK(loaded.bars == frame.bars);

  // Spot-check one bar against an independent re-parse of the file.
  const auto fields = find_row(path, frame.days[100], frame.tickers[7]);
  REQUIRE(fields.size() == 7);
  CHECK(std::strtod(fields[2].c_str(), nullptr) == loaded.bar(7, 100).open);
  CHECK(std::strtod(fields[5].c_str(), nullptr) == loaded.bar(7, 100).close);
  CHECK(std::strtod(fields[6].c_str(), nullptr) == loaded.bar(7, 100).volume);
}

TEST_CASE("load_csv from a per-ticker directory") {
  const auto dir = std::filesystem::temp_directory_path() / "md_dir";
  std::filesystem::create_directories(dir);
  write_text((dir / "AAA.csv").string(),
             "date,open,high,low,close,volume\n"
             "2021-01-04,10,11,9,10.5,100\n"
             "2021-01-05,10.5,11,10,10.6,100\n");
  write_text((dir / "BBB.csv").string(),
             "date,open,high,low,close,volume\n"
             "2021-01-04,20,21,19,20.5,100\n"
             "2021-01-05,20.5,21,20,20.6,100\n");
  const MarketFrame frame = load_csv(dir.string(), {"BBB", "AAA"});
  CHECK(frame.tickers == std::vector<std::string>{"BBB", "AAA"});  // caller order kept
  CHECK(frame.num_days() == 2);
  CHECK_THROWS_AS(load_csv(dir.string(), {"ZZZ"}), Error);
}

TEST_CASE("compute_vwap is the typical price") {
  MarketFrame frame;
  frame.tickers = {"AAA"};
  frame.days = {"2021-01-04"};
  frame.bars = {{"2021-01-04", 10, 12, 8, 10, 100}};
  const MarketFrame out = compute_vwap(frame);
  CHECK(out.vwap.at(0, 0) == doctest::Approx(10.0));
  CHECK(out.bars == frame.bars);  // everything else untouched

  SUBCASE("constant prices give vwap == price") {
    MarketFrame flat;
    flat.tickers = {"AAA"};
    for (int t = 0; t < 5; ++t) {
      flat.days.push_back("2021-01-0" + std::to_string(t + 4));
      flat.bars.push_back({flat.days.back(), 7, 7, 7, 7, 10});
    }
    const MarketFrame computed = compute_vwap(flat);
    for (int t = 0; t < 5; ++t) CHECK(computed.vwap.at(0, t) == doctest::Approx(7.0));
  }
}

TEST_CASE("compute_vwap matches element-wise recomputation on a random frame") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 5;
  spec.n_days = 20;
  spec.seed = 3;
  auto [frame, panel] = generate_synthetic(spec);
  frame = compute_vwap(std::move(frame));
  for (int i = 0; i < frame.num_stocks(); ++i)
    for (int t = 0; t < frame.num_days(); ++t) {
      const OhlcvBar& b = frame.bar(i, t);
      CHECK(frame.vwap.at(i, t) == doctest::Approx((b.high + b.low + b.close) / 3.0).epsilon(1e-12));
      CHECK(frame.vwap.at(i, t) >= b.low);
      CHECK(frame.vwap.at(i, t) <= b.high);
    }
}

TEST_CASE("realized_forward_return") {
  MarketFrame frame;
  frame.tickers = {"AAA"};
  frame.days = {"2021-01-04", "2021-01-05", "2021-01-06"};
  frame.bars = {{"2021-01-04", 100, 101, 99, 100, 1},
                {"2021-01-05", 101, 102, 100, 101, 1},
                {"2021-01-06", 101, 102, 100, 101, 1}};
  CHECK(realized_forward_return(frame, 0, 0) == doctest::Approx(0.01));
  CHECK(realized_forward_return(frame, 0, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(realized_forward_return(frame, 0, 2), Error);

  SUBCASE("full frame matches a brute-force loop") {
    SyntheticMarketSpec spec;
    spec.n_stocks = 3;
    spec.n_days = 10;
    spec.seed = 5;
    const auto [synth, panel] = generate_synthetic(spec);
    for (int i = 0; i < 3; ++i)
      for (int t = 0; t + 1 < 10; ++t) {
        const double expected = synth.open(i, t + 1) / synth.open(i, t) - 1.0;
        CHECK(realized_forward_return(synth, i, t) == doctest::Approx(expected).epsilon(1e-15));
      }
  }
}

TEST_CASE("generate_synthetic plants a perfect signal at rho = 1") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 4;
  spec.n_days = 120;
  spec.seed = 21;
  spec.signal_quality = 1.0;
  const auto [frame, panel] = generate_synthetic(spec);
  for (int i = 0; i < spec.n_stocks; ++i)
    for (int t = 0; t + 1 < spec.n_days; ++t) {
      const double realized = realized_forward_return(frame, i, t);
      if (realized == 0) continue;
      CHECK((panel.fr.at(i, t) > 0) == (realized > 0));
    }
}

TEST_CASE("generate_synthetic at rho = 0 is uncorrelated with realized returns") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 4;
  spec.n_days = 600;
  spec.seed = 22;
  spec.signal_quality = 0.0;
  const auto [frame, panel] = generate_synthetic(spec);

  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  int n = 0;
  for (int i = 0; i < spec.n_stocks; ++i)
    for (int t = 0; t + 1 < spec.n_days; ++t) {
      const double x = panel.fr.at(i, t);
      const double y = realized_forward_return(frame, i, t);
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
      ++n;
    }
  REQUIRE(n >= 2000);
  const double corr = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(std::fabs(corr) < 0.1);
}

TEST_CASE("generate_synthetic is a pure function of the spec") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 3;
  spec.n_days = 50;
  spec.seed = 99;
  spec.signal_quality = 0.5;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);

  spec.seed = 100;
  const auto c = generate_synthetic(spec);
  CHECK_FALSE(a.first == c.first);
}

TEST_CASE("generate_synthetic validates its spec") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec.n_stocks = 2;
  spec.n_days = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec.n_days = 10;
  spec.signal_quality = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec.signal_quality = 0.5;
  spec.volatility = {0.2, 0.3};  // 2 values for 2 stocks: fine
  CHECK_NOTHROW(generate_synthetic(spec));
  spec.volatility = {0.2, 0.3, 0.4};
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
}

TEST_CASE("synthetic signals are finite and sentiment stays in [-1, 1]") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SyntheticMarketSpec spec;
    spec.n_stocks = 6;
    spec.n_days = 200;
    spec.seed = seed;
    spec.signal_quality = 0.7;
    spec.volatility = {0.8};  // stress with high volatility
    const auto [frame, panel] = generate_synthetic(spec);
    for (double v : panel.fr.data()) CHECK(std::isfinite(v));
    for (double v : panel.ss.data()) {
      CHECK(std::isfinite(v));
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("baseline_signals") {
  SUBCASE("monotonically rising prices give positive fr after the warmup") {
    MarketFrame frame;
    frame.tickers = {"AAA"};
    double price = 100;
    for (int t = 0; t < 30; ++t) {
      frame.days.push_back("2021-02-" + std::string(t < 9 ? "0" : "") + std::to_string(t + 1));
      frame.bars.push_back({frame.days.back(), price, price * 1.01, price * 0.999, price * 1.005, 10});
      price *= 1.01;
    }
    const SignalPanel panel = baseline_signals(frame, 10);
    for (int t = 0; t < 10; ++t) {
      CHECK(panel.fr.at(0, t) == 0.0);
      CHECK(panel.ss.at(0, t) == 0.0);
    }
    for (int t = 10; t < 30; ++t) {
      CHECK(panel.fr.at(0, t) > 0.0);
      CHECK(panel.ss.at(0, t) > 0.0);
    }
  }

  SUBCASE("constant prices give zero signals") {
    MarketFrame frame;
    frame.tickers = {"AAA"};
    for (int t = 0; t < 20; ++t) {
      frame.days.push_back("2021-03-" + std::string(t < 9 ? "0" : "") + std::to_string(t + 1));
      frame.bars.push_back({frame.days.back(), 50, 50, 50, 50, 10});
    }
    const SignalPanel panel = baseline_signals(frame, 5);
    for (int t = 0; t < 20; ++t) {
      CHECK(panel.fr.at(0, t) == 0.0);
      CHECK(panel.ss.at(0, t) == 0.0);
    }
  }

  SUBCASE("random frame matches a rolling-mean recomputation") {
    SyntheticMarketSpec spec;
    spec.n_stocks = 4;
    spec.n_days = 60;
    spec.seed = 31;
    const auto [frame, unused] = generate_synthetic(spec);
    const int lookback = 10;
    const SignalPanel panel = baseline_signals(frame, lookback);
    for (int i = 0; i < 4; ++i)
      for (int t = lookback; t < 60; ++t) {
        double sum = 0;
        for (int k = 0; k < lookback; ++k) sum += frame.open(i, t - k) / frame.open(i, t - k - 1) - 1.0;
        CHECK(panel.fr.at(i, t) == doctest::Approx(sum / lookback).epsilon(1e-12));
        CHECK(panel.ss.at(i, t) >= -1.0);
        CHECK(panel.ss.at(i, t) <= 1.0);
      }
  }

  SUBCASE("lookback must be positive") {
    SyntheticMarketSpec spec;
    const auto [frame, unused] = generate_synthetic(spec);
    CHECK_THROWS_AS(baseline_signals(frame, 0), Error);
  }
}

TEST_CASE("signal CSV round trip") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 3;
  spec.n_days = 15;
  spec.seed = 8;
  const auto [frame, panel] = generate_synthetic(spec);
  const std::string path = temp_path("md_signals.csv");
  write_signals_csv(panel, frame, path);
  const SignalPanel loaded = load_signals_csv(path, frame);
  CHECK(loaded == panel);

  // A missing cell is an error.
  SyntheticMarketSpec bigger = spec;
  bigger.n_days = 16;
  const auto [frame2, panel2] = generate_synthetic(bigger);
  CHECK_THROWS_AS(load_signals_csv(path, frame2), Error);
}
