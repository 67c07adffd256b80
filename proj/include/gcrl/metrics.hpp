#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcrl/error.hpp"
#include "gcrl/space.hpp"

namespace gcrl {

struct EvalRecord {
  std::uint64_t env_steps = 0;
  double ext_reward_mean = 0.0;
  double ext_reward_std = 0.0;
  double ext_success = 0.0;
  std::optional<double> avg_goal_success;  // absent for baseline runs
  std::vector<double> per_goal_success;    // aligned with MetricsTable::goal_labels

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// One run's evaluation stream.
///
/// CSV schema (fixed): env_steps, ext_reward_mean, ext_reward_std,
/// ext_success, avg_goal_success, then one `goal[<point>]` column per
/// evaluation goal. Baseline runs leave avg_goal_success empty and have no
/// goal columns. Reals are written in shortest round-trip form.
struct MetricsTable {
  std::vector<std::string> goal_labels;
  std::vector<EvalRecord> records;

  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

inline const std::vector<std::string>& fixed_csv_columns() {
  static const std::vector<std::string> cols = {"env_steps", "ext_reward_mean", "ext_reward_std", "ext_success",
                                                "avg_goal_success"};
  return cols;
}

inline std::string goal_label(const Observation& goal) { return "goal[" + goal.to_string() + "]"; }

inline std::string to_csv(const MetricsTable& table) {
  std::ostringstream out;
  const auto& cols = fixed_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  for (const auto& g : table.goal_labels) out << ',' << g;
  out << '\n';
  for (const EvalRecord& r : table.records) {
    require(r.per_goal_success.size() == table.goal_labels.size(), "to_csv: per-goal column count mismatch");
    out << r.env_steps << ',' << format_double(r.ext_reward_mean) << ',' << format_double(r.ext_reward_std) << ','
        << format_double(r.ext_success) << ',';
    if (r.avg_goal_success) out << format_double(*r.avg_goal_success);
    for (double v : r.per_goal_success) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_real(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::runtime_error("bad numeric CSV cell '" + s + "'");
  return v;
}

}  // namespace detail

inline MetricsTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics CSV");
  const auto header = detail::split_csv_line(line);
  const auto& cols = fixed_csv_columns();
  if (header.size() < cols.size() || !std::equal(cols.begin(), cols.end(), header.begin()))
    throw std::runtime_error("metrics CSV header does not match the fixed schema");
  MetricsTable t;
  t.goal_labels.assign(header.begin() + static_cast<std::ptrdiff_t>(cols.size()), header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw std::runtime_error("metrics CSV row has wrong column count");
    EvalRecord r;
    r.env_steps = static_cast<std::uint64_t>(detail::parse_real(cells[0]));
    r.ext_reward_mean = detail::parse_real(cells[1]);
    r.ext_reward_std = detail::parse_real(cells[2]);
    r.ext_success = detail::parse_real(cells[3]);
    if (!cells[4].empty()) r.avg_goal_success = detail::parse_real(cells[4]);
    for (std::size_t i = cols.size(); i < cells.size(); ++i) r.per_goal_success.push_back(detail::parse_real(cells[i]));
    t.records.push_back(std::move(r));
  }
  return t;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

/// Cross-run summary: per evaluation point, the mean and population standard
/// deviation of every metric column over the runs.
struct AggregateTable {
  std::vector<std::string> columns;  // metric columns, excluding env_steps
  std::vector<std::uint64_t> env_steps;
  std::vector<std::vector<double>> mean;  // [row][column]
  std::vector<std::vector<double>> stddev;
  std::vector<std::vector<std::size_t>> count;
  std::size_t runs = 0;
};

inline AggregateTable aggregate(const std::vector<MetricsTable>& runs) {
  require(!runs.empty(), "aggregate: no runs");
  AggregateTable agg;
  agg.runs = runs.size();
  const MetricsTable& first = runs.front();
  for (const MetricsTable& r : runs) {
    require(r.goal_labels == first.goal_labels, "aggregate: runs have different goal columns");
    require(r.records.size() == first.records.size(), "aggregate: runs have different evaluation points");
    for (std::size_t i = 0; i < r.records.size(); ++i)
      require(r.records[i].env_steps == first.records[i].env_steps, "aggregate: evaluation steps differ between runs");
  }
  agg.columns = {"ext_reward_mean", "ext_reward_std", "ext_success", "avg_goal_success"};
  agg.columns.insert(agg.columns.end(), first.goal_labels.begin(), first.goal_labels.end());
  for (std::size_t row = 0; row < first.records.size(); ++row) {
    agg.env_steps.push_back(first.records[row].env_steps);
    std::vector<double> means, stds;
    std::vector<std::size_t> counts;
    for (std::size_t col = 0; col < agg.columns.size(); ++col) {
      std::vector<double> values;
      for (const MetricsTable& r : runs) {
        const EvalRecord& rec = r.records[row];
        std::optional<double> v;
        switch (col) {
          case 0: v = rec.ext_reward_mean; break;
          case 1: v = rec.ext_reward_std; break;
          case 2: v = rec.ext_success; break;
          case 3: v = rec.avg_goal_success; break;
          default: v = rec.per_goal_success[col - 4]; break;
        }
        if (v) values.push_back(*v);
      }
      // Welford, so identical values give exactly zero spread
      double m = 0, m2 = 0, s = 0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - m;
        m += d / static_cast<double>(i + 1);
        m2 += d * (values[i] - m);
      }
      if (!values.empty()) s = std::sqrt(m2 / static_cast<double>(values.size()));
      means.push_back(values.empty() ? std::nan("") : m);
      stds.push_back(values.empty() ? std::nan("") : s);
      counts.push_back(values.size());
    }
    agg.mean.push_back(std::move(means));
    agg.stddev.push_back(std::move(stds));
    agg.count.push_back(std::move(counts));
  }
  return agg;
}

inline std::string to_csv(const AggregateTable& agg) {
  std::ostringstream out;
  out << "env_steps,runs";
  for (const auto& c : agg.columns) out << ',' << c << "_mean," << c << "_std";
  out << '\n';
  for (std::size_t row = 0; row < agg.env_steps.size(); ++row) {
    out << agg.env_steps[row] << ',' << agg.runs;
    for (std::size_t col = 0; col < agg.columns.size(); ++col) {
      if (agg.count[row][col] == 0) {
        out << ",,";
      } else {
        out << ',' << format_double(agg.mean[row][col]) << ',' << format_double(agg.stddev[row][col]);
      }
    }
    out << '\n';
  }
  return out.str();
}

/// Gaussian smoothing with half-sample-symmetric reflection at the edges
/// (d c b a | a b c d | d c b a) and a kernel truncated at 4 sigma.
/// sigma == 0 returns the input unchanged.
inline std::vector<double> smooth_series(const std::vector<double>& values, double sigma) {
  require(sigma >= 0, "smooth_series: sigma must be non-negative");
  if (sigma == 0 || values.empty()) return values;
  const auto radius = static_cast<long long>(4.0 * sigma + 0.5);
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (long long i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;
  const auto n = static_cast<long long>(values.size());
  auto reflect = [n](long long i) {
    const long long period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  std::vector<double> out(values.size(), 0.0);
  for (long long i = 0; i < n; ++i) {
    double acc = 0;
    for (long long k = -radius; k <= radius; ++k)
      acc += kernel[static_cast<std::size_t>(k + radius)] * values[static_cast<std::size_t>(reflect(i + k))];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace gcrl
