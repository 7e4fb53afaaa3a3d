#pragma once

#include "scenfilter/backtest.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenfilter {

/// Invalid configuration value; field() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/**
 * Flat key = value experiment configuration.
 *
 * Sources are applied in increasing precedence: built-in defaults, the file,
 * SCENFILTER_<KEY> environment variables, command-line flags.
 */
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string data;
  std::vector<std::string> methods{"all"};
  int K_max = 5;
  int rmt_p = 5;
  double power_q = 1.25;
  FloorMode floor_mode = FloorMode::Inequality;
  bool use_cuts = false;
  Eigen::Index in_sample_len = 52;
  Eigen::Index out_sample_len = 12;
  Eigen::Index step = 12;
  double time_limit = 7200.0;
  std::string out_dir = "results";
  std::uint64_t seed = 1;
  /// 0 = machine parallelism.
  unsigned workers = 0;
  /// Size of the data written by gen-data.
  Eigen::Index gen_assets = 10;
  Eigen::Index gen_weeks = 120;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError on the first invalid field.
  void validate() const;

  WindowScheme scheme() const { return {in_sample_len, out_sample_len, step}; }
  BacktestParams backtest_params() const;
};

/// Every key accepted in files and as SCENFILTER_<KEY> variables.
const std::vector<std::string>& config_keys();

/// Sets one field from its text form. Throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& config, const std::string& key);

/// Applies a config document on top of `base`. Blank lines and '#' comments are ignored.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
std::string serialize_config(const ExperimentConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads from the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Applies SCENFILTER_<KEY> overrides (key upper-cased).
void apply_env(ExperimentConfig& config, const EnvLookup& lookup = process_env);

}  // namespace scenfilter
