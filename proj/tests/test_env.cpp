#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "hrt/error.hpp"
#include "hrt/market_data.hpp"
#include "hrt/rng.hpp"
#include "hrt/trading_env.hpp"

using namespace hrt;

namespace {

// Flat two-stock market for hand-computable cases.
MarketFrame make_flat_frame(int days, double p0 = 100.0, double p1 = 50.0) {
  MarketFrame frame;
  frame.tickers = {"AAA", "BBB"};
  for (int t = 0; t < days; ++t) {
    frame.days.push_back("2021-01-" + std::string(t < 9 ? "0" : "") + std::to_string(t + 1));
  }
  for (double p : {p0, p1})
    for (int t = 0; t < days; ++t) frame.bars.push_back({frame.days[t], p, p, p, p, 1000});
  return frame;
}

SignalPanel zero_signals(const MarketFrame& frame) {
  return {Grid(frame.num_stocks(), frame.num_days()), Grid(frame.num_stocks(), frame.num_days())};
}

PortfolioState make_state(std::vector<double> prices, std::vector<std::int64_t> holdings, double cash) {
  PortfolioState s;
  s.prices = std::move(prices);
  s.holdings = std::move(holdings);
  s.cash = cash;
  return s;
}

}  // namespace

TEST_CASE("alignment_reward matches the exhaustive sign table") {
  CHECK(alignment_reward(1, 2.5) == 1);
  CHECK(alignment_reward(0, -3.0) == 0);
  CHECK(alignment_reward(-1, 0.0) == 0);  // sgn(0) = 0
  for (int a : {-1, 0, 1})
    for (int dp : {-1, 0, 1}) {
      const int expected = a == 0 ? 0 : a * dp;  // brute-force truth table
      CHECK(alignment_reward(a, 7.25 * dp) == expected);
    }
}

TEST_CASE("alpha_schedule") {
  CHECK(alpha_schedule(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::fabs(alpha_schedule(1000.0, 1.0, 0.001) - std::exp(-1.0)) < 1e-12);
  double prev = 2.0;
  for (int t = 0; t < 5000; t += 100) {
    const double a = alpha_schedule(t);
    CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("hlc_reward blends alignment and LLC terms") {
  CHECK(hlc_reward(3.0, 123.0, 1.0) == doctest::Approx(3.0));
  CHECK(hlc_reward(4.0, 2.0, 0.5) == doctest::Approx(3.0));
  CHECK(hlc_reward(5.0, -1.5, 0.0) == doctest::Approx(-1.5));
}

TEST_CASE("reset starts flat with the configured capital") {
  const MarketFrame frame = make_flat_frame(5);
  const SignalPanel signals = zero_signals(frame);
  EnvConfig cfg;
  TradingEnv env(frame, signals, cfg);
  auto [state, obs] = env.reset();
  CHECK(state.cash == doctest::Approx(1'000'000.0));
  CHECK(state.value() == doctest::Approx(cfg.initial_capital));
  for (auto h : state.holdings) CHECK(h == 0);
  CHECK(obs.fr.size() == 2);

  auto [state2, obs2] = env.reset();
  CHECK(state2.cash == state.cash);
  CHECK(state2.holdings == state.holdings);
  CHECK(state2.prices == state.prices);

  MarketFrame tiny = make_flat_frame(1);
  const SignalPanel tiny_signals = zero_signals(tiny);
  TradingEnv short_env(tiny, tiny_signals, cfg);
  CHECK_THROWS_AS(short_env.reset(), Error);
}

TEST_CASE("execute_trades: all-hold at flat prices is a no-op") {
  EnvConfig cfg;
  const PortfolioState s = make_state({100, 50}, {3, 4}, 1000);
  const DirectiveVector hold(2);
  const std::vector<double> sizes{0.5, 0.7};
  const std::vector<double> next{100, 50};
  const TradeOutcome out = execute_trades(s, hold, sizes, cfg, next);
  CHECK(out.llc_reward == 0.0);
  CHECK(out.next.holdings == s.holdings);
  CHECK(out.next.cash == s.cash);
  CHECK(out.next.day == s.day + 1);
  CHECK(out.trades.empty());
}

TEST_CASE("execute_trades: one buy matches the hand ledger") {
  EnvConfig cfg;  // cost 0.001, h_max 100, scale 1e-4
  const PortfolioState s = make_state({100.0}, {0}, 1'000'000.0);
  DirectiveVector d(1);
  d[0] = 1;
  const std::vector<double> sizes{0.1};  // 10 shares
  const std::vector<double> next{101.0};
  const TradeOutcome out = execute_trades(s, d, sizes, cfg, next);

  REQUIRE(out.trades.size() == 1);
  CHECK(out.trades[0].shares == 10);
  CHECK(out.next.holdings[0] == 10);
  CHECK(out.next.cash == doctest::Approx(1'000'000.0 - 1001.0).epsilon(1e-15));
  // value after at next prices: 10 * 101 + (1e6 - 1001); before: 1e6
  const double expected_reward = 1e-4 * (10 * 101.0 + (1'000'000.0 - 1001.0) - 1'000'000.0);
  CHECK(out.llc_reward == doctest::Approx(expected_reward).epsilon(1e-12));
}

TEST_CASE("execute_trades: sells clip to holdings (no shorting)") {
  EnvConfig cfg;
  const PortfolioState s = make_state({10.0}, {5}, 0.0);
  DirectiveVector d(1);
  d[0] = -1;
  const std::vector<double> sizes{1.0};  // wants h_max = 100 shares
  const TradeOutcome out = execute_trades(s, d, sizes, cfg, std::vector<double>{10.0});
  REQUIRE(out.trades.size() == 1);
  CHECK(out.trades[0].shares == -5);
  CHECK(out.next.holdings[0] == 0);
  CHECK(out.next.cash == doctest::Approx(5 * 10.0 * 0.999));
}

TEST_CASE("execute_trades: cash-constrained buys match a sequential ledger oracle") {
  EnvConfig cfg;
  cfg.initial_capital = 2'000.0;
  cfg.h_max = 50;
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3;
    std::vector<double> prices{rng.uniform(5, 120), rng.uniform(5, 120), rng.uniform(5, 120)};
    std::vector<std::int64_t> holdings{static_cast<std::int64_t>(rng.uniform_index(20)),
                                       static_cast<std::int64_t>(rng.uniform_index(20)),
                                       static_cast<std::int64_t>(rng.uniform_index(20))};
    const double cash = rng.uniform(0, 2000);
    DirectiveVector d(n);
    std::vector<double> sizes(n);
    for (int i = 0; i < n; ++i) {
      d[i] = static_cast<int>(rng.uniform_index(3)) - 1;
      sizes[i] = rng.uniform();
    }
    const PortfolioState s = make_state(prices, holdings, cash);
    const TradeOutcome out = execute_trades(s, d, sizes, cfg, prices);

    // Oracle: independent sequential ledger, sells first then buys by index.
    double ocash = cash;
    std::vector<std::int64_t> oh = holdings;
    for (int i = 0; i < n; ++i) {
      if (d[i] != -1) continue;
      const std::int64_t want = std::llround(sizes[i] * cfg.h_max);
      const std::int64_t sell = std::min(want, oh[i]);
      oh[i] -= sell;
      ocash += 0.999 * prices[i] * static_cast<double>(sell);
    }
    for (int i = 0; i < n; ++i) {
      if (d[i] != 1) continue;
      const std::int64_t want = std::llround(sizes[i] * cfg.h_max);
      const std::int64_t afford = static_cast<std::int64_t>(std::floor(ocash / (1.001 * prices[i])));
      const std::int64_t buy = std::min(want, afford);
      if (buy > 0) {
        oh[i] += buy;
        ocash -= 1.001 * prices[i] * static_cast<double>(buy);
      }
    }
    CHECK(out.next.holdings == oh);
    CHECK(out.next.cash == doctest::Approx(ocash).epsilon(1e-12));
    CHECK(out.next.cash >= 0.0);
  }
}

TEST_CASE("execute_trades rejects non-finite sizes") {
  EnvConfig cfg;
  const PortfolioState s = make_state({10.0}, {0}, 100.0);
  DirectiveVector d(1);
  d[0] = 1;
  CHECK_THROWS_AS(execute_trades(s, d, std::vector<double>{std::nan("")}, cfg, std::vector<double>{10.0}),
                  Error);
}

TEST_CASE("accounting conservation and exact cost deduction under fuzzing") {
  Rng rng(1234);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(5));
    std::vector<double> prices(n);
    std::vector<std::int64_t> holdings(n);
    for (int i = 0; i < n; ++i) {
      prices[i] = rng.uniform(1.0, 300.0);
      holdings[i] = static_cast<std::int64_t>(rng.uniform_index(200));
    }
    const double cash = rng.uniform(0.0, 50'000.0);
    DirectiveVector d(n);
    std::vector<double> sizes(n);
    for (int i = 0; i < n; ++i) {
      d[i] = static_cast<int>(rng.uniform_index(3)) - 1;
      sizes[i] = rng.uniform();
    }

    const bool zero_cost = trial % 2 == 0;
    EnvConfig cfg;
    cfg.cost_rate = zero_cost ? 0.0 : 0.001;
    const PortfolioState s = make_state(prices, holdings, cash);
    const double before = s.value();
    const TradeOutcome out = execute_trades(s, d, sizes, cfg, prices);  // constant prices

    double notional = 0;
    for (const TradeRecord& tr : out.trades)
      notional += tr.price * static_cast<double>(std::llabs(tr.shares));

    const double after = out.next.value();
    if (zero_cost) {
      CHECK(after == doctest::Approx(before).epsilon(1e-12));
    } else {
      CHECK(after - before == doctest::Approx(-cfg.cost_rate * notional).epsilon(1e-9));
      if (!out.trades.empty()) CHECK(after < before);
    }
    CHECK(out.next.cash >= 0.0);
    for (auto h : out.next.holdings) CHECK(h >= 0);
  }
}

TEST_CASE("hold-neutrality: held stocks contribute exactly zero alignment") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4;
    std::vector<int> entries(n);
    std::vector<double> deltas(n);
    for (int i = 0; i < n; ++i) {
      entries[i] = static_cast<int>(rng.uniform_index(3)) - 1;
      deltas[i] = rng.uniform(-5.0, 5.0);
    }
    int full = 0, traded_only = 0;
    for (int i = 0; i < n; ++i) {
      full += alignment_reward(entries[i], deltas[i]);
      if (entries[i] != 0) traded_only += alignment_reward(entries[i], deltas[i]);
    }
    CHECK(full == traded_only);
  }
}

TEST_CASE("hlc_observe slices the panel") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 3;
  spec.n_days = 12;
  spec.seed = 5;
  const auto [frame, panel] = generate_synthetic(spec);
  const HlcObservation obs = hlc_observe(panel, 4);
  for (int i = 0; i < 3; ++i) {
    CHECK(obs.fr[i] == panel.fr.at(i, 4));
    CHECK(obs.ss[i] == panel.ss.at(i, 4));
  }
  CHECK(obs.flat().size() == 6);
  CHECK_THROWS_AS(hlc_observe(panel, 12), Error);
  CHECK_THROWS_AS(hlc_observe(panel, -1), Error);
}

TEST_CASE("llc_observe layout and normalization") {
  const MarketFrame frame = make_flat_frame(4);
  const SignalPanel signals = zero_signals(frame);
  EnvConfig cfg;
  TradingEnv env(frame, signals, cfg);
  env.reset();

  DirectiveVector d(2);
  d[0] = 1;
  d[1] = -1;
  const LlcObservation obs = env.llc_observation(d);
  REQUIRE(obs.size() == 3 * 2 + 1);
  CHECK(obs.values[0] == doctest::Approx(1.0));  // price / first open
  CHECK(obs.values[1] == doctest::Approx(1.0));
  CHECK(obs.values[2] == 0.0);  // holdings / h_max
  CHECK(obs.values[3] == 0.0);
  CHECK(obs.values[4] == doctest::Approx(1.0));  // cash / capital
  CHECK(obs.values[5] == 1.0);                   // directive passthrough
  CHECK(obs.values[6] == -1.0);

  SUBCASE("length is 3N+1 for other stock counts") {
    for (int n : {1, 3, 8}) {
      PortfolioState s;
      s.prices.assign(n, 10.0);
      s.holdings.assign(n, 2);
      s.cash = 100;
      LlcNormalizer norm{std::vector<double>(n, 10.0), 100.0, 5};
      const LlcObservation o = llc_observe(s, DirectiveVector(n), norm);
      CHECK(o.size() == 3 * n + 1);
    }
  }
}

TEST_CASE("episode determinism: identical inputs give identical trajectories") {
  SyntheticMarketSpec spec;
  spec.n_stocks = 3;
  spec.n_days = 40;
  spec.seed = 17;
  const auto [frame, panel] = generate_synthetic(spec);
  EnvConfig cfg;

  auto run_once = [&] {
    TradingEnv env(frame, panel, cfg);
    env.reset();
    Rng rng(55);
    std::vector<double> values;
    while (!env.done()) {
      DirectiveVector d(3);
      std::vector<double> sizes(3);
      for (int i = 0; i < 3; ++i) {
        d[i] = static_cast<int>(rng.uniform_index(3)) - 1;
        sizes[i] = rng.uniform();
      }
      env.step(d, sizes);
      values.push_back(env.state().value());
    }
    return values;
  };
  CHECK(run_once() == run_once());  // bit-for-bit
}

TEST_CASE("trade log records executed trades with costs") {
  const MarketFrame frame = make_flat_frame(3);
  const SignalPanel signals = zero_signals(frame);
  EnvConfig cfg;
  TradingEnv env(frame, signals, cfg);
  env.reset();
  DirectiveVector d(2);
  d[0] = 1;
  env.step(d, std::vector<double>{0.25, 0.0});  // buy 25 shares of AAA at 100
  REQUIRE(env.trade_log().size() == 1);
  const TradeRecord& tr = env.trade_log()[0];
  CHECK(tr.day == 0);
  CHECK(tr.stock == 0);
  CHECK(tr.action == 1);
  CHECK(tr.shares == 25);
  CHECK(tr.price == doctest::Approx(100.0));
  CHECK(tr.cost == doctest::Approx(0.001 * 25 * 100.0));
}
