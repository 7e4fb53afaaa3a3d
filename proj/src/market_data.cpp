#include "scenfilter/market_data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace scenfilter {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower;
  for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "nan" || lower == "na" || lower == "null" || lower == "n/a";
}

bool is_iso_date(const std::string& label) {
  return label.size() == 10 && label[4] == '-' && label[7] == '-';
}

}  // namespace

std::int64_t date_ordinal(const std::string& label) {
  if (is_iso_date(label)) {
    int y = 0;
    unsigned m = 0, d = 0;
    const char* p = label.data();
    auto ok = [](std::from_chars_result r, const char* expect_end) {
      return r.ec == std::errc{} && r.ptr == expect_end;
    };
    if (!ok(std::from_chars(p, p + 4, y), p + 4) || !ok(std::from_chars(p + 5, p + 7, m), p + 7) ||
        !ok(std::from_chars(p + 8, p + 10, d), p + 10)) {
      throw InputError("malformed date '" + label + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw InputError("invalid calendar date '" + label + "'");
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
  }
  std::int64_t value = 0;
  const auto r = std::from_chars(label.data(), label.data() + label.size(), value);
  if (label.empty() || r.ec != std::errc{} || r.ptr != label.data() + label.size()) {
    throw InputError("date '" + label + "' is neither ISO-8601 nor an integer ordinal");
  }
  return value;
}

void PriceSeries::validate() const {
  if (static_cast<Eigen::Index>(asset_names.size()) != prices.rows()) {
    throw InputError("asset name count does not match price rows");
  }
  if (static_cast<Eigen::Index>(dates.size()) != prices.cols()) {
    throw InputError("date count does not match price columns");
  }
  for (Eigen::Index j = 0; j < prices.rows(); ++j) {
    for (Eigen::Index t = 0; t < prices.cols(); ++t) {
      const double p = prices(j, t);
      if (std::isnan(p)) {
        throw InputError("missing value at (" + asset_names[j] + "," + dates[t] + ")");
      }
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw InputError("non-positive price at (" + asset_names[j] + "," + dates[t] + ")");
      }
    }
  }
  for (std::size_t t = 1; t < dates.size(); ++t) {
    if (is_iso_date(dates[t]) != is_iso_date(dates[0])) {
      throw InputError("inconsistent date formats ('" + dates[0] + "' vs '" + dates[t] + "')");
    }
    if (date_ordinal(dates[t]) <= date_ordinal(dates[t - 1])) {
      throw InputError("duplicate or non-increasing date '" + dates[t] + "'");
    }
  }
  if (!dates.empty()) date_ordinal(dates[0]);
}

PriceSeries parse_prices(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      first = false;
    }
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw InputError("empty price file");

  const auto& header = rows.front();
  if (header.size() < 2) throw InputError("header must name at least one asset");
  if (header[0] != "date") throw InputError("first header cell must be 'date', got '" + header[0] + "'");

  PriceSeries series;
  series.asset_names.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(series.asset_names.size());
  const auto num_dates = static_cast<Eigen::Index>(rows.size() - 1);
  series.prices.resize(n, num_dates);

  for (Eigen::Index t = 0; t < num_dates; ++t) {
    const auto& row = rows[static_cast<std::size_t>(t) + 1];
    if (static_cast<Eigen::Index>(row.size()) != n + 1) {
      throw InputError("row " + std::to_string(t + 2) + " has " + std::to_string(row.size()) +
                       " cells, expected " + std::to_string(n + 1));
    }
    series.dates.push_back(row[0]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j) + 1];
      const std::string where = "(" + series.asset_names[j] + "," + row[0] + ")";
      if (is_missing(cell)) throw InputError("missing value at " + where);
      double value = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size()) {
        throw InputError("non-numeric cell '" + cell + "' at " + where);
      }
      if (!(value > 0.0) || !std::isfinite(value)) throw InputError("non-positive price at " + where);
      series.prices(j, t) = value;
    }
  }
  series.validate();
  return series;
}

std::string format_prices(const PriceSeries& prices) {
  std::string out = "date";
  for (const std::string& name : prices.asset_names) out += "," + name;
  out += '\n';
  char buf[32];
  for (Eigen::Index t = 0; t < prices.num_dates(); ++t) {
    out += prices.dates[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < prices.num_assets(); ++j) {
      const auto r = std::to_chars(buf, buf + sizeof buf, prices.prices(j, t));
      out += ',';
      out.append(buf, r.ptr);
    }
    out += '\n';
  }
  return out;
}

PriceSeries load_prices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open price file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_prices(buf.str());
}

ReturnScenarioMatrix::ReturnScenarioMatrix(Matrix r) : returns(std::move(r)) {
  if (returns.cols() < 1 || returns.rows() < 1) throw InputError("return matrix must be non-empty");
  if (!returns.allFinite()) throw InputError("return matrix has non-finite entries");
}

ReturnScenarioMatrix ReturnScenarioMatrix::window(Eigen::Index begin, Eigen::Index end) const {
  if (begin < 0 || end > num_scenarios() || begin >= end) {
    throw InputError("invalid scenario window [" + std::to_string(begin) + "," + std::to_string(end) + ")");
  }
  return ReturnScenarioMatrix(returns.middleCols(begin, end - begin));
}

ReturnScenarioMatrix compute_returns(const PriceSeries& prices) {
  if (prices.num_dates() < 2) throw InputError("need at least 2 price columns to form returns");
  const Eigen::Index T = prices.num_dates() - 1;
  Matrix r(prices.num_assets(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    r.col(t) = (prices.prices.col(t + 1) - prices.prices.col(t)).cwiseQuotient(prices.prices.col(t));
  }
  if ((r.array() <= -1.0).any()) throw InputError("returns must exceed -1");
  return ReturnScenarioMatrix(std::move(r));
}

AssetStats compute_stats(const ReturnScenarioMatrix& r) {
  const Eigen::Index T = r.num_scenarios();
  if (T < 2) throw InputError("need at least 2 scenarios for statistics");
  AssetStats s;
  s.mu = r.returns.rowwise().mean();
  const Matrix centered = r.returns.colwise() - s.mu;
  s.cov = (centered * centered.transpose()) / static_cast<double>(T);
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  s.vol = s.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Index n = r.num_assets();
  s.corr.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        s.corr(i, j) = 1.0;
      } else {
        const double denom = s.vol(i) * s.vol(j);
        s.corr(i, j) = denom > 0.0 ? s.cov(i, j) / denom : 0.0;
      }
    }
  }
  return s;
}

double market_portfolio_return(const ReturnScenarioMatrix& r) {
  return r.returns.colwise().mean().mean();
}

}  // namespace scenfilter
