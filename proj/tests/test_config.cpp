#include "scenfilter/config.hpp"
#include "scenfilter/synthetic.hpp"

#include <gtest/gtest.h>

#include <map>

namespace scenfilter {
namespace {

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(Config, DefaultsMatchTheProtocol) {
  const ExperimentConfig c;
  EXPECT_EQ(c.K_max, 5);
  EXPECT_EQ(c.rmt_p, 5);
  EXPECT_EQ(c.power_q, 1.25);
  EXPECT_EQ(c.time_limit, 7200.0);
  EXPECT_EQ(c.scheme().in_sample_len, 52);
  EXPECT_EQ(c.scheme().out_sample_len, 12);
  EXPECT_EQ(c.scheme().step, 12);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const ExperimentConfig c = parse_config(
      "# experiment\n"
      "schema_version = 1\n"
      "\n"
      "  methods = markowitz, filter-exact:2 ,heuristic-v2   # trailing comment\n"
      "K_max=3\n"
      "floor_mode = equality\n"
      "use_cuts = yes\n"
      "time_limit = 12.5\n");
  EXPECT_EQ(c.methods, (std::vector<std::string>{"markowitz", "filter-exact:2", "heuristic-v2"}));
  EXPECT_EQ(c.K_max, 3);
  EXPECT_EQ(c.floor_mode, FloorMode::Equality);
  EXPECT_TRUE(c.use_cuts);
  EXPECT_EQ(c.time_limit, 12.5);
}

TEST(ConfigProperty, RoundTrips) {
  ExperimentConfig c;
  c.data = "prices/weekly.csv";
  c.methods = {"rmt", "heuristic-v1:4"};
  c.K_max = 4;
  c.rmt_p = 3;
  c.power_q = 1.0 / 3.0;
  c.floor_mode = FloorMode::Equality;
  c.use_cuts = true;
  c.in_sample_len = 40;
  c.step = 5;
  c.time_limit = 0.1;
  c.seed = 18446744073709551615ull;
  c.workers = 4;
  c.gen_weeks = 77;
  const ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(parse_config(serialize_config(back)), c);
  EXPECT_EQ(parse_config(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, FieldLevelErrors) {
  EXPECT_EQ(field_of([] { parse_config("colour = red\n"); }), "colour");
  EXPECT_EQ(field_of([] { parse_config("K_max = three\n"); }), "K_max");
  EXPECT_EQ(field_of([] { parse_config("use_cuts = maybe\n"); }), "use_cuts");
  EXPECT_EQ(field_of([] { parse_config("floor_mode = sideways\n"); }), "floor_mode");
  EXPECT_EQ(field_of([] { parse_config("schema_version = 2\n"); }), "schema_version");
  EXPECT_EQ(field_of([] { parse_config("just words\n"); }), "line 1");
}

TEST(Config, Validation) {
  ExperimentConfig c;
  c.K_max = 27;
  EXPECT_EQ(field_of([&] { c.validate(); }), "K_max");
  c.K_max = 26;
  EXPECT_NO_THROW(c.validate());

  c = {};
  c.time_limit = 0.0;
  EXPECT_EQ(field_of([&] { c.validate(); }), "time_limit");

  c = {};
  c.methods = {"markowitz", "sharpe-max"};
  EXPECT_EQ(field_of([&] { c.validate(); }), "methods");

  c = {};
  c.methods = {"filter-exact:30"};
  EXPECT_EQ(field_of([&] { c.validate(); }), "methods");

  c = {};
  c.power_q = -1.0;
  EXPECT_EQ(field_of([&] { c.validate(); }), "power_q");
}

TEST(Config, Precedence) {
  // file < environment < explicit assignment (what the CLI does with flags)
  ExperimentConfig c = parse_config("K_max = 2\nrmt_p = 3\nout_dir = from-file\n");
  const std::map<std::string, std::string> env{{"SCENFILTER_RMT_P", "4"}, {"SCENFILTER_OUT_DIR", "from-env"}};
  apply_env(c, [&](const std::string& name) -> std::optional<std::string> {
    const auto it = env.find(name);
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  });
  EXPECT_EQ(c.K_max, 2);
  EXPECT_EQ(c.rmt_p, 4);
  EXPECT_EQ(c.out_dir, "from-env");
  set_config_value(c, "out_dir", "from-flag");
  EXPECT_EQ(c.out_dir, "from-flag");
}

TEST(Config, EnvErrorsNameTheField) {
  ExperimentConfig c;
  EXPECT_EQ(field_of([&] {
              apply_env(c, [](const std::string& name) -> std::optional<std::string> {
                if (name == "SCENFILTER_WORKERS") return "-1";
                return std::nullopt;
              });
            }),
            "workers");
}

TEST(Config, BacktestParams) {
  ExperimentConfig c;
  c.rmt_p = 2;
  c.use_cuts = true;
  c.workers = 3;
  const BacktestParams p = c.backtest_params();
  EXPECT_EQ(p.rmt_p, 2);
  EXPECT_TRUE(p.use_cuts);
  EXPECT_EQ(p.workers, 3u);
  EXPECT_EQ(p.time_limit, 7200.0);
}

// ---------------------------------------------------------------- synthetic data

TEST(Synthetic, ShapeAndDates) {
  SyntheticMarket spec;
  spec.assets = 3;
  spec.weeks = 5;
  const PriceSeries p = generate_prices(spec);
  EXPECT_EQ(p.num_assets(), 3);
  EXPECT_EQ(p.num_dates(), 6);
  EXPECT_EQ(p.dates.front(), "2015-01-02");
  EXPECT_EQ(p.dates[1], "2015-01-09");
  EXPECT_EQ(p.dates.back(), "2015-02-06");
  EXPECT_EQ(p.asset_names[2], "A3");
  EXPECT_EQ(compute_returns(p).num_scenarios(), 5);
}

TEST(SyntheticProperty, SeededAndRoundTripsThroughCsv) {
  SyntheticMarket spec;
  spec.seed = 42;
  const PriceSeries a = generate_prices(spec);
  const PriceSeries b = generate_prices(spec);
  EXPECT_EQ(a.prices, b.prices);
  spec.seed = 43;
  EXPECT_NE(generate_prices(spec).prices, a.prices);

  const PriceSeries back = parse_prices(format_prices(a));
  EXPECT_EQ(back.prices, a.prices);
  EXPECT_EQ(back.dates, a.dates);
  EXPECT_EQ(back.asset_names, a.asset_names);
  EXPECT_GT(compute_returns(a).returns.minCoeff(), -1.0);
}

TEST(Synthetic, UniformReturns) {
  const ReturnScenarioMatrix r = uniform_returns(5, 12, 3);
  EXPECT_EQ(r.num_assets(), 5);
  EXPECT_EQ(r.num_scenarios(), 12);
  EXPECT_GE(r.returns.minCoeff(), -0.1);
  EXPECT_LE(r.returns.maxCoeff(), 0.1);
  EXPECT_EQ(uniform_returns(5, 12, 3).returns, r.returns);
  EXPECT_THROW(uniform_returns(0, 12, 3), InputError);
}

}  // namespace
}  // namespace scenfilter
