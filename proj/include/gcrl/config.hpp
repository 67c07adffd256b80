#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gcrl/dqn.hpp"
#include "gcrl/envs.hpp"
#include "gcrl/error.hpp"
#include "gcrl/goal_select.hpp"
#include "gcrl/mlp.hpp"

namespace gcrl {

enum class Mode { baseline, goal_conditioned };

inline const char* to_string(Mode m) { return m == Mode::baseline ? "baseline" : "goal_conditioned"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "goal_conditioned") return Mode::goal_conditioned;
  throw ContractViolation("unknown mode '" + s + "'");
}

/// Everything a training run needs. Defaults come from defaults_for(env) and
/// follow the published hyperparameters where those exist.
struct RunConfig {
  std::string env = "cliff_walking";
  Mode mode = Mode::goal_conditioned;
  Strategy strategy = Strategy::novelty;
  std::size_t total_steps = 2'000'000;
  std::size_t eval_interval = 0;  // 0 means total_steps / 100
  std::size_t eval_episodes = 20;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/run";

  double goal_tolerance = 0.1;
  SelectionParams selection{};
  std::vector<std::size_t> grid_bins;  // box spaces only

  Architecture arch = Architecture::residual4blocks;
  std::size_t hidden_width = 256;
  AgentHyperparams agent{};
  std::size_t buffer_size = 1'000'000;
  std::size_t her_goals = 4;  // hindsight goals per unaltered use

  EnvironmentOptions env_options{};
  std::vector<std::string> eval_goals;  // empty: the environment's default set
  std::string external_goal;            // empty: the environment's own task point

  std::size_t resolved_eval_interval() const {
    return eval_interval > 0 ? eval_interval : std::max<std::size_t>(1, total_steps / 100);
  }
  double relabel_probability() const {
    return static_cast<double>(her_goals) / static_cast<double>(her_goals + 1);
  }
};

inline RunConfig defaults_for(const std::string& env) {
  RunConfig c;
  c.env = env;
  if (env == "cliff_walking") {
    c.total_steps = 2'000'000;
    c.selection.target_success = 0.9;
    c.arch = Architecture::residual4blocks;
    c.eval_episodes = 20;
  } else if (env == "frozen_lake") {
    c.total_steps = 1'000'000;
    c.selection.target_success = 0.75;
    c.arch = Architecture::simple3x256;
    c.eval_episodes = 20;
  } else if (env == "pathological_mountain_car") {
    c.total_steps = 10'000'000;
    c.selection.target_success = 0.75;
    c.arch = Architecture::residual4blocks;
    c.eval_episodes = 10;
    c.grid_bins = {100, 100};
  } else {
    throw ContractViolation("unknown environment '" + env + "'");
  }
  return c;
}

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ContractViolation("config key '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ContractViolation("config key '" + key + "': expected true/false, got '" + value + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

template <class T>
std::string join(const std::vector<T>& v, const char* sep) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? sep : "") << v[i];
  return out.str();
}

}  // namespace detail

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads `key = value` lines; '#' starts a comment. Later keys win.
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("config line " + std::to_string(lineno) + ": expected 'key = value'");
    kv.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return kv;
}

/// Applies one key to the config. Every key listed here is documented in the README.
inline void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_number;
  auto size = [&] { return parse_number<std::size_t>(key, v); };
  auto real = [&] { return parse_number<double>(key, v); };
  auto& a = c.agent;
  auto& mc = c.env_options.mountain_car;

  if (key == "env") c.env = v;
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "strategy") c.strategy = parse_strategy(v);
  else if (key == "total_steps") c.total_steps = size();
  else if (key == "eval_interval") c.eval_interval = size();
  else if (key == "eval_episodes") c.eval_episodes = size();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "goal_tolerance") c.goal_tolerance = real();
  else if (key == "selection.epsilon") c.selection.epsilon = real();
  else if (key == "selection.exponent") c.selection.exponent = real();
  else if (key == "selection.target_success") c.selection.target_success = real();
  else if (key == "selection.uniform_mix") c.selection.uniform_mix = real();
  else if (key == "grid_bins") {
    c.grid_bins.clear();
    for (const auto& part : detail::split(v, ',')) c.grid_bins.push_back(parse_number<std::size_t>(key, part));
  }
  else if (key == "arch") c.arch = parse_architecture(v);
  else if (key == "hidden_width") c.hidden_width = size();
  else if (key == "gamma") a.gamma = real();
  else if (key == "learning_rate") a.learning_rate = real();
  else if (key == "batch_size") a.batch_size = size();
  else if (key == "train_freq") a.train_freq = size();
  else if (key == "gradient_steps") a.gradient_steps = size();
  else if (key == "target_update_interval") a.target_update_interval = size();
  else if (key == "learning_starts") a.learning_starts = size();
  else if (key == "exploration_initial_eps") a.exploration_initial = real();
  else if (key == "exploration_final_eps") a.exploration_final = real();
  else if (key == "exploration_fraction") a.exploration_fraction = real();
  else if (key == "max_grad_norm") a.max_grad_norm = real();
  else if (key == "buffer_size") c.buffer_size = size();
  else if (key == "her_goals") c.her_goals = size();
  else if (key == "pmc.tilt") mc.tilt = real();
  else if (key == "pmc.x_min") mc.x_min = real();
  else if (key == "frozen_lake.slippery") c.env_options.frozen_lake_slippery = detail::parse_bool(key, v);
  else if (key == "eval_goals") c.eval_goals = detail::split(v, ';');
  else if (key == "external_goal") c.external_goal = v;
  else throw ContractViolation("unknown config key '" + key + "'");
}

/// Builds a config from key-values: `env` selects the per-environment
/// defaults, every other key overrides one field.
inline RunConfig config_from_key_values(const KeyValues& kv) {
  std::string env = "cliff_walking";
  for (const auto& [k, v] : kv)
    if (k == "env") env = v;
  RunConfig c = defaults_for(env);
  for (const auto& [k, v] : kv) apply_key(c, k, v);
  return c;
}

inline RunConfig parse_config(const std::string& text) { return config_from_key_values(parse_key_values(text)); }

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Every field as key-values; parse_config(format) reproduces the config.
inline KeyValues to_key_values(const RunConfig& c) {
  const auto& a = c.agent;
  const auto& mc = c.env_options.mountain_car;
  KeyValues kv = {
      {"env", c.env},
      {"mode", to_string(c.mode)},
      {"strategy", to_string(c.strategy)},
      {"total_steps", std::to_string(c.total_steps)},
      {"eval_interval", std::to_string(c.eval_interval)},
      {"eval_episodes", std::to_string(c.eval_episodes)},
      {"seed", std::to_string(c.seed)},
      {"output_dir", c.output_dir},
      {"goal_tolerance", format_double(c.goal_tolerance)},
      {"selection.epsilon", format_double(c.selection.epsilon)},
      {"selection.exponent", format_double(c.selection.exponent)},
      {"selection.target_success", format_double(c.selection.target_success)},
      {"selection.uniform_mix", format_double(c.selection.uniform_mix)},
      {"grid_bins", detail::join(c.grid_bins, ",")},
      {"arch", to_string(c.arch)},
      {"hidden_width", std::to_string(c.hidden_width)},
      {"gamma", format_double(a.gamma)},
      {"learning_rate", format_double(a.learning_rate)},
      {"batch_size", std::to_string(a.batch_size)},
      {"train_freq", std::to_string(a.train_freq)},
      {"gradient_steps", std::to_string(a.gradient_steps)},
      {"target_update_interval", std::to_string(a.target_update_interval)},
      {"learning_starts", std::to_string(a.learning_starts)},
      {"exploration_initial_eps", format_double(a.exploration_initial)},
      {"exploration_final_eps", format_double(a.exploration_final)},
      {"exploration_fraction", format_double(a.exploration_fraction)},
      {"max_grad_norm", format_double(a.max_grad_norm)},
      {"buffer_size", std::to_string(c.buffer_size)},
      {"her_goals", std::to_string(c.her_goals)},
      {"pmc.tilt", format_double(mc.tilt)},
      {"pmc.x_min", format_double(mc.x_min)},
      {"frozen_lake.slippery", c.env_options.frozen_lake_slippery ? "true" : "false"},
      {"eval_goals", detail::join(c.eval_goals, ";")},
      {"external_goal", c.external_goal},
  };
  return kv;
}

inline std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  for (const auto& [k, v] : to_key_values(c)) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace gcrl
