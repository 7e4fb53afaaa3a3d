// scenfilter: rolling-window backtests, single-instance solves, oracle
// cross-checks and synthetic data generation.

#include "scenfilter/backtest.hpp"
#include "scenfilter/baselines.hpp"
#include "scenfilter/config.hpp"
#include "scenfilter/heuristic.hpp"
#include "scenfilter/serialize.hpp"
#include "scenfilter/synthetic.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace sf = scenfilter;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

/// Flags shared by every command; unset ones leave the config untouched.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::vector<std::string> methods;
  std::optional<int> K;
  std::optional<int> p;
  std::optional<double> q;
  std::optional<double> time_limit;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "key = value config file");
  cmd.add_option("--data", f.data, "price CSV");
  cmd.add_option("--method", f.methods, "method name, name:K or 'all' (repeatable)");
  cmd.add_option("--K", f.K, "scenarios to filter (backtest: K_max)");
  cmd.add_option("--p", f.p, "eigenvalues kept by the RMT filter");
  cmd.add_option("--q", f.q, "power mapping exponent");
  cmd.add_option("--time-limit", f.time_limit, "seconds per exact solve");
  cmd.add_option("--seed", f.seed, "seed for generated data");
  cmd.add_option("--out-dir", f.out_dir, "report directory");
  cmd.add_option("--workers", f.workers, "threads, 0 = machine parallelism");
}

/// Defaults, then the config file, then SCENFILTER_* variables, then flags.
sf::ExperimentConfig resolve_config(const CommonFlags& f) {
  sf::ExperimentConfig config;
  if (f.config) {
    config = sf::load_config(*f.config);
    // Data paths in a config file are relative to the file.
    if (!config.data.empty() && std::filesystem::path(config.data).is_relative())
      config.data = (std::filesystem::path(*f.config).parent_path() / config.data).lexically_normal().string();
  }
  sf::apply_env(config);
  if (f.data) config.data = *f.data;
  if (!f.methods.empty()) config.methods = f.methods;
  if (f.K) config.K_max = *f.K;
  if (f.p) config.rmt_p = *f.p;
  if (f.q) config.power_q = *f.q;
  if (f.time_limit) config.time_limit = *f.time_limit;
  if (f.seed) config.seed = *f.seed;
  if (f.out_dir) config.out_dir = *f.out_dir;
  if (f.workers) config.workers = *f.workers;
  config.validate();
  return config;
}

sf::PriceSeries load_data(const sf::ExperimentConfig& config) {
  if (config.data.empty()) throw sf::ConfigError("data", "no price file given");
  return sf::load_prices(config.data);
}

std::string cell(const std::optional<double>& v, int precision) {
  if (!v || !std::isfinite(*v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

void print_metrics(const sf::BacktestReport& report) {
  std::printf("%-16s %10s %10s %8s %10s %10s %8s %8s\n", "method", "AvReturn", "V-Out", "Sharpe", "MeanAssets",
              "MeanTime", "MeanGap", "MRE");
  for (const sf::MethodReport& m : report.methods) {
    std::printf("%-16s", m.method.label().c_str());
    if (!m.metrics) {
      std::printf(" all windows skipped\n");
      continue;
    }
    const sf::PerformanceMetrics& x = *m.metrics;
    std::printf(" %10s %10s %8s %10s %10s %8s %8s\n", cell(x.av_return, 5).c_str(), cell(x.v_out, 6).c_str(),
                cell(x.sharpe, 4).c_str(), cell(x.mean_assets, 2).c_str(), cell(x.mean_time, 3).c_str(),
                cell(x.mean_gap, 2).c_str(), cell(x.mre, 3).c_str());
  }
}

int cmd_backtest(const CommonFlags& flags) {
  const sf::ExperimentConfig config = resolve_config(flags);
  const std::vector<sf::MethodSpec> methods = sf::parse_method_list(config.methods, config.K_max);
  const sf::PriceSeries prices = load_data(config);
  sf::BacktestReport report =
      sf::run_backtest(sf::compute_returns(prices), methods, config.scheme(), config.backtest_params());
  report.asset_names = prices.asset_names;
  const sf::ReportFiles files = sf::write_report_files(report, config.out_dir);
  print_metrics(report);
  for (const sf::MethodReport& m : report.methods) {
    const auto skipped =
        std::count_if(m.windows.begin(), m.windows.end(), [](const sf::WindowResult& w) { return w.skipped; });
    if (skipped > 0) std::fprintf(stderr, "warning: %s skipped %td window(s)\n", m.method.label().c_str(), skipped);
  }
  std::printf("\n%zu windows in %.2f s\nwrote %s\n      %s\n      %s\n", report.windows.size(), report.wall_time,
              files.report_json.c_str(), files.metrics_csv.c_str(), files.values_csv.c_str());
  return kExitOk;
}

struct SolveFlags {
  std::optional<double> mu0;
  bool use_cuts = false;
};

int cmd_solve(const CommonFlags& flags, const SolveFlags& solve) {
  sf::ExperimentConfig config = resolve_config(flags);
  if (config.methods.size() != 1 || config.methods[0] == "all")
    throw sf::ConfigError("methods", "solve takes exactly one --method");
  const int K = flags.K.value_or(1);
  std::string token = config.methods[0];
  if (token.find(':') == std::string::npos && sf::parse_methods(token, 1)[0].uses_K())
    token += ":" + std::to_string(K);
  const sf::MethodSpec method = sf::parse_methods(token, K)[0];

  const sf::ReturnScenarioMatrix r = sf::compute_returns(load_data(config));
  const double mu0 = solve.mu0.value_or(sf::market_portfolio_return(r));
  const sf::AssetStats stats = sf::compute_stats(r);

  sf::Json out{{"method", method.label()}, {"mu0", mu0}};
  switch (method.kind) {
    case sf::MethodKind::Market:
      out["weights"] = std::vector<double>(static_cast<std::size_t>(r.num_assets()), 1.0 / r.num_assets());
      break;
    case sf::MethodKind::Markowitz:
      out["solution"] = sf::to_json(sf::solve_markowitz(stats, mu0, config.floor_mode));
      break;
    case sf::MethodKind::Rmt:
    case sf::MethodKind::PowerMapping: {
      const sf::FilteredCorrelation fc = sf::psd_repair(method.kind == sf::MethodKind::Rmt
                                                            ? sf::rmt_filter(stats, config.rmt_p)
                                                            : sf::power_map(stats, config.power_q));
      out["correlation"] = sf::to_json(fc);
      out["solution"] = sf::to_json(sf::solve_filtered_markowitz(stats, fc, mu0, config.floor_mode));
      break;
    }
    case sf::MethodKind::FilterExact: {
      sf::BranchAndBoundOptions options;
      options.time_limit = config.time_limit;
      options.use_cuts = config.use_cuts || solve.use_cuts;
      out["solution"] = sf::to_json(sf::solve_branch_and_bound(sf::FilterInstance(r, K, mu0, config.floor_mode), options));
      break;
    }
    case sf::MethodKind::HeuristicV1:
    case sf::MethodKind::HeuristicV2: {
      sf::HeuristicOptions options;
      options.time_limit = config.time_limit;
      options.workers = config.workers;
      const sf::FilterInstance inst(r, K, mu0, config.floor_mode);
      out["solution"] = sf::to_json(method.kind == sf::MethodKind::HeuristicV1 ? sf::heuristic_v1(inst, options)
                                                                                : sf::heuristic_v2(inst, options));
      break;
    }
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

struct VerifyFlags {
  Eigen::Index assets = 5;
  Eigen::Index scenarios = 12;
  int seeds = 10;
};

int cmd_verify(const CommonFlags& flags, const VerifyFlags& verify) {
  const sf::ExperimentConfig config = resolve_config(flags);
  const int K = flags.K.value_or(2);
  if (verify.assets < 1) throw sf::ConfigError("assets", "must be at least 1");
  if (verify.seeds < 1) throw sf::ConfigError("seeds", "must be at least 1");
  if (K < 0 || verify.scenarios - K < 2) throw sf::ConfigError("K", "must leave at least two scenarios");
  sf::OracleOptions oracle_options;
  oracle_options.workers = config.workers;
  if (sf::binomial(static_cast<std::uint64_t>(verify.scenarios), static_cast<std::uint64_t>(K)) >
      oracle_options.max_subsets)
    throw sf::ConfigError("scenarios", "C(T, K) exceeds the oracle guard of " +
                                           std::to_string(oracle_options.max_subsets) + " subsets");

  constexpr double kExactTol = 1e-6;
  constexpr double kHeuristicTol = 1e-8;
  int passed = 0;
  std::printf("n=%td T=%td K=%d seeds %llu..%llu\n", verify.assets, verify.scenarios, K,
              static_cast<unsigned long long>(config.seed),
              static_cast<unsigned long long>(config.seed + static_cast<std::uint64_t>(verify.seeds) - 1));
  for (int i = 0; i < verify.seeds; ++i) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(i);
    const sf::ReturnScenarioMatrix r = sf::uniform_returns(verify.assets, verify.scenarios, seed);
    const sf::FilterInstance inst(r, K, sf::market_portfolio_return(r), config.floor_mode);
    sf::BranchAndBoundOptions bb_options;
    bb_options.time_limit = config.time_limit;
    bb_options.use_cuts = config.use_cuts;
    const sf::MipSolution exact = sf::solve_branch_and_bound(inst, bb_options);
    const double scale = std::max(std::abs(exact.objective), 1e-12);

    std::vector<std::string> problems;
    double reference = 0.0;
    if (K == 0) {
      const sf::QpSolution mk = sf::solve_markowitz(sf::compute_stats(r), inst.mu0, config.floor_mode);
      reference = mk.objective;
      if (std::abs(exact.objective - mk.objective) > kHeuristicTol) problems.push_back("exact != markowitz");
    } else {
      const sf::MipSolution oracle = sf::brute_force_oracle(inst, oracle_options);
      reference = oracle.objective;
      if (std::abs(exact.objective - oracle.objective) > kExactTol * scale) problems.push_back("exact != oracle");
      for (const sf::HeuristicTrace& h : {sf::heuristic_v1(inst), sf::heuristic_v2(inst)}) {
        const std::string name = sf::to_string(h.version);
        if (!h.feasible) {
          problems.push_back(name + " infeasible");
        } else if (h.objective() < oracle.objective - kHeuristicTol) {
          problems.push_back(name + " below the optimum");
        } else if (K == 1 && std::abs(h.objective() - oracle.objective) > kHeuristicTol) {
          problems.push_back(name + " not optimal at K=1");
        }
      }
    }
    if (problems.empty()) ++passed;
    std::printf("seed %llu  exact %.12e  reference %.12e  %s", static_cast<unsigned long long>(seed),
                exact.objective, reference, problems.empty() ? "ok" : "FAIL:");
    for (const std::string& p : problems) std::printf(" %s;", p.c_str());
    std::printf("\n");
  }
  std::printf("%d/%d passed\n", passed, verify.seeds);
  return passed == verify.seeds ? kExitOk : kExitRuntime;
}

struct GenFlags {
  std::optional<Eigen::Index> assets;
  std::optional<Eigen::Index> weeks;
  std::string output;
};

int cmd_gen_data(const CommonFlags& flags, const GenFlags& gen) {
  sf::ExperimentConfig config = resolve_config(flags);
  if (gen.assets) set_config_value(config, "gen_assets", std::to_string(*gen.assets));
  if (gen.weeks) set_config_value(config, "gen_weeks", std::to_string(*gen.weeks));
  config.validate();
  sf::SyntheticMarket spec;
  spec.assets = config.gen_assets;
  spec.weeks = config.gen_weeks;
  spec.seed = config.seed;
  const std::filesystem::path path =
      gen.output.empty() ? std::filesystem::path(config.out_dir) / "synthetic.csv" : std::filesystem::path(gen.output);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  file << sf::format_prices(sf::generate_prices(spec));
  if (!file) throw std::runtime_error("cannot write " + path.string());
  std::printf("wrote %s (%td assets, %td weekly returns, seed %llu)\n", path.c_str(), spec.assets, spec.weeks,
              static_cast<unsigned long long>(spec.seed));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario filtering mean-variance portfolios"};
  app.require_subcommand(1);

  CommonFlags backtest_flags, solve_flags, verify_flags, gen_flags;
  SolveFlags solve;
  VerifyFlags verify;
  GenFlags gen;

  CLI::App* backtest_cmd = app.add_subcommand("backtest", "rolling-window backtest; writes report files");
  add_common(*backtest_cmd, backtest_flags);

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one instance on the whole data set; prints JSON");
  add_common(*solve_cmd, solve_flags);
  solve_cmd->add_option("--mu0", solve.mu0, "return floor (default: market portfolio mean)");
  solve_cmd->add_flag("--cuts", solve.use_cuts, "add critical-set cuts to the exact model");

  CLI::App* verify_cmd = app.add_subcommand("verify", "cross-check exact, oracle and heuristics on random instances");
  add_common(*verify_cmd, verify_flags);
  verify_cmd->add_option("--assets", verify.assets, "assets per instance")->capture_default_str();
  verify_cmd->add_option("--scenarios", verify.scenarios, "scenarios per instance")->capture_default_str();
  verify_cmd->add_option("--seeds", verify.seeds, "number of seeds, starting at --seed")->capture_default_str();

  CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a synthetic weekly price CSV");
  add_common(*gen_cmd, gen_flags);
  gen_cmd->add_option("--assets", gen.assets, "number of assets");
  gen_cmd->add_option("--weeks", gen.weeks, "number of weekly returns");
  gen_cmd->add_option("-o,--output", gen.output, "output file (default: <out-dir>/synthetic.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*backtest_cmd) return cmd_backtest(backtest_flags);
    if (*solve_cmd) return cmd_solve(solve_flags, solve);
    if (*verify_cmd) return cmd_verify(verify_flags, verify);
    if (*gen_cmd) return cmd_gen_data(gen_flags, gen);
  } catch (const sf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitValidation;
  } catch (const sf::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
