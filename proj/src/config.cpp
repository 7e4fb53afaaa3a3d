#include "scenfilter/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace scenfilter {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw ConfigError(key, "expected a number, got '" + text + "'");
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (const std::string t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "schema_version", "data",   "methods",  "K_max",       "rmt_p",      "power_q",   "floor_mode",
      "use_cuts",       "in_sample_len", "out_sample_len", "step", "time_limit", "out_dir", "seed",
      "workers",        "gen_assets", "gen_weeks"};
  return keys;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "schema_version") {
    c.schema_version = parse_integer<int>(key, value);
    if (c.schema_version != ExperimentConfig::kSchemaVersion)
      throw ConfigError(key, "unsupported version " + value + " (expected " +
                                 std::to_string(ExperimentConfig::kSchemaVersion) + ")");
  } else if (key == "data") {
    c.data = value;
  } else if (key == "methods") {
    c.methods = split_list(value);
  } else if (key == "K_max") {
    c.K_max = parse_integer<int>(key, value);
  } else if (key == "rmt_p") {
    c.rmt_p = parse_integer<int>(key, value);
  } else if (key == "power_q") {
    c.power_q = parse_double(key, value);
  } else if (key == "floor_mode") {
    try {
      c.floor_mode = parse_floor_mode(value);
    } catch (const InputError& e) {
      throw ConfigError(key, e.what());
    }
  } else if (key == "use_cuts") {
    c.use_cuts = parse_bool(key, value);
  } else if (key == "in_sample_len") {
    c.in_sample_len = parse_integer<Eigen::Index>(key, value);
  } else if (key == "out_sample_len") {
    c.out_sample_len = parse_integer<Eigen::Index>(key, value);
  } else if (key == "step") {
    c.step = parse_integer<Eigen::Index>(key, value);
  } else if (key == "time_limit") {
    c.time_limit = parse_double(key, value);
  } else if (key == "out_dir") {
    c.out_dir = value;
  } else if (key == "seed") {
    c.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "workers") {
    c.workers = parse_integer<unsigned>(key, value);
  } else if (key == "gen_assets") {
    c.gen_assets = parse_integer<Eigen::Index>(key, value);
  } else if (key == "gen_weeks") {
    c.gen_weeks = parse_integer<Eigen::Index>(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

std::string get_config_value(const ExperimentConfig& c, const std::string& key) {
  if (key == "schema_version") return std::to_string(c.schema_version);
  if (key == "data") return c.data;
  if (key == "methods") {
    std::string out;
    for (const std::string& m : c.methods) out += (out.empty() ? "" : ",") + m;
    return out;
  }
  if (key == "K_max") return std::to_string(c.K_max);
  if (key == "rmt_p") return std::to_string(c.rmt_p);
  if (key == "power_q") return format_double(c.power_q);
  if (key == "floor_mode") return to_string(c.floor_mode);
  if (key == "use_cuts") return c.use_cuts ? "true" : "false";
  if (key == "in_sample_len") return std::to_string(c.in_sample_len);
  if (key == "out_sample_len") return std::to_string(c.out_sample_len);
  if (key == "step") return std::to_string(c.step);
  if (key == "time_limit") return format_double(c.time_limit);
  if (key == "out_dir") return c.out_dir;
  if (key == "seed") return std::to_string(c.seed);
  if (key == "workers") return std::to_string(c.workers);
  if (key == "gen_assets") return std::to_string(c.gen_assets);
  if (key == "gen_weeks") return std::to_string(c.gen_weeks);
  throw ConfigError(key, "unknown key");
}

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) throw ConfigError("schema_version", "unsupported version");
  if (methods.empty()) throw ConfigError("methods", "at least one method is required");
  if (K_max < 0) throw ConfigError("K_max", "must be nonnegative");
  if (in_sample_len < 2) throw ConfigError("in_sample_len", "must be at least 2");
  if (out_sample_len < 1) throw ConfigError("out_sample_len", "must be at least 1");
  if (step < 1) throw ConfigError("step", "must be at least 1");
  if (2 * static_cast<Eigen::Index>(K_max) > in_sample_len)
    throw ConfigError("K_max", std::to_string(K_max) + " exceeds in_sample_len / 2 = " +
                                   std::to_string(in_sample_len / 2));
  if (rmt_p < 1) throw ConfigError("rmt_p", "must be at least 1");
  if (!(power_q > 0.0)) throw ConfigError("power_q", "must be positive");
  if (!(time_limit > 0.0)) throw ConfigError("time_limit", "must be positive");
  if (gen_assets < 1) throw ConfigError("gen_assets", "must be at least 1");
  if (gen_weeks < 2) throw ConfigError("gen_weeks", "must be at least 2");
  try {
    for (const MethodSpec& m : parse_method_list(methods, K_max)) {
      if (m.uses_K() && 2 * m.K > in_sample_len)
        throw ConfigError("methods", m.label() + " exceeds in_sample_len / 2");
    }
  } catch (const InputError& e) {
    throw ConfigError("methods", e.what());
  }
}

BacktestParams ExperimentConfig::backtest_params() const {
  BacktestParams p;
  p.rmt_p = rmt_p;
  p.power_q = power_q;
  p.floor = floor_mode;
  p.time_limit = time_limit;
  p.use_cuts = use_cuts;
  p.workers = workers;
  return p;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected key = value, got '" + line + "'");
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream file(path);
  if (!file) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config(text.str(), std::move(base));
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const std::string& key : config_keys()) out += key + " = " + get_config_value(config, key) + "\n";
  return out;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* value = std::getenv(name.c_str())) return std::string(value);
  return std::nullopt;
}

void apply_env(ExperimentConfig& config, const EnvLookup& lookup) {
  for (const std::string& key : config_keys()) {
    std::string name = "SCENFILTER_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (const auto value = lookup(name)) set_config_value(config, key, *value);
  }
}

}  // namespace scenfilter
