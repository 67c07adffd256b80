// Command line front end: train, eval, aggregate, report.

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcrl/harness.hpp"

namespace fs = std::filesystem;
using namespace gcrl;

namespace {

std::vector<fs::path> expand_runs(const std::string& pattern) {
  glob_t g{};
  std::vector<fs::path> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) {
      fs::path p = g.gl_pathv[i];
      if (fs::is_directory(p)) p /= "metrics.csv";
      if (fs::is_regular_file(p)) out.push_back(p);
    }
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no metrics files match '" + pattern + "'");
  return out;
}

std::vector<MetricsTable> load_runs(const std::vector<fs::path>& files) {
  std::vector<MetricsTable> runs;
  for (const auto& f : files) {
    try {
      runs.push_back(parse_csv(read_text_file(f)));
    } catch (const std::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  return runs;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
              bool quiet) {
  RunConfig config = load_config(config_path);
  if (seed) config.seed = *seed;
  if (!out_dir.empty()) config.output_dir = out_dir;
  const fs::path dir = config.output_dir;
  std::cerr << "training " << config.env << " (" << to_string(config.mode) << ", " << to_string(config.strategy)
            << ") seed " << config.seed << " for " << config.total_steps << " steps\n";
  RunResult run = run_training(config, [&](const EvalRecord& r, const TrainingSummary& s) {
    if (quiet) return;
    std::cerr << "step " << r.env_steps << "  ext_reward " << format_double(r.ext_reward_mean) << "  ext_success "
              << format_double(r.ext_success);
    if (r.avg_goal_success) std::cerr << "  avg_goal_success " << format_double(*r.avg_goal_success);
    std::cerr << "  episodes " << s.episodes << "  task_solved " << s.task_solved_episodes << "  "
              << static_cast<long>(s.wall_seconds) << "s\n";
  });
  emit_metrics(run, dir);
  save_checkpoint(*run.agent, config, run.summary.env_steps, dir / "checkpoint.manifest");
  if (run.aborted) {
    std::cerr << "run aborted: " << *run.aborted << " (partial output in " << dir << ")\n";
    return 2;
  }
  std::cerr << "wrote " << (dir / "metrics.csv") << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& goals_path, std::size_t episodes) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const auto env = make_environment(ck.config);
  const std::size_t n = episodes > 0 ? episodes : ck.config.eval_episodes;
  std::vector<GoalSpec> goals;
  if (!goals_path.empty()) {
    std::istringstream in(read_text_file(goals_path));
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (!line.empty()) goals.push_back({env->observation_space().parse(line), ck.config.goal_tolerance});
    }
  } else if (ck.config.mode == Mode::goal_conditioned) {
    goals = resolve_eval_goals(ck.config, *env);
  }
  const std::uint64_t seed = derive_seed(ck.config.seed, kStreamEval);
  std::optional<GoalSpec> task_goal;
  if (ck.config.mode == Mode::goal_conditioned) task_goal = resolve_task_goal(ck.config, *env);
  const ExternalEval ext = evaluate_external(*ck.agent, *env, n, task_goal, seed);
  std::cout << "env_steps," << ck.env_steps << "\n";
  std::cout << "ext_reward_mean," << format_double(ext.reward_mean) << "\n";
  std::cout << "ext_reward_std," << format_double(ext.reward_std) << "\n";
  std::cout << "ext_success," << format_double(ext.success_rate) << "\n";
  if (!goals.empty()) {
    require(ck.config.mode == Mode::goal_conditioned, "goal evaluation needs a goal-conditioned checkpoint");
    const GoalGridEval grid = evaluate_goal_grid(*ck.agent, *env, goals, n, seed);
    std::cout << "avg_goal_success," << format_double(grid.average) << "\n";
    for (std::size_t i = 0; i < goals.size(); ++i)
      std::cout << goal_label(goals[i].point) << "," << format_double(grid.per_goal[i]) << "\n";
  }
  return 0;
}

int cmd_aggregate(const std::string& pattern, const std::string& out) {
  const auto files = expand_runs(pattern);
  const AggregateTable agg = aggregate(load_runs(files));
  write_text_file(out, to_csv(agg));
  std::cerr << "aggregated " << files.size() << " runs into " << out << "\n";
  return 0;
}

// Smoothed mean and std of the headline columns, for plotting elsewhere.
int cmd_report(const std::string& pattern, double sigma, const std::string& out) {
  const auto files = expand_runs(pattern);
  const AggregateTable agg = aggregate(load_runs(files));
  const std::size_t shown = std::min<std::size_t>(4, agg.columns.size());
  std::vector<std::vector<double>> mean(shown), stddev(shown);
  std::vector<bool> present(shown, false);
  for (std::size_t c = 0; c < shown; ++c) {
    std::vector<double> m, s;
    for (std::size_t r = 0; r < agg.env_steps.size(); ++r) {
      m.push_back(agg.mean[r][c]);
      s.push_back(agg.stddev[r][c]);
      present[c] = present[c] || agg.count[r][c] > 0;
    }
    mean[c] = smooth_series(m, sigma);
    stddev[c] = smooth_series(s, sigma);
  }
  std::ostringstream csv;
  csv << "env_steps";
  for (std::size_t c = 0; c < shown; ++c)
    if (present[c]) csv << ',' << agg.columns[c] << "_mean," << agg.columns[c] << "_std";
  csv << '\n';
  for (std::size_t r = 0; r < agg.env_steps.size(); ++r) {
    csv << agg.env_steps[r];
    for (std::size_t c = 0; c < shown; ++c)
      if (present[c]) csv << ',' << format_double(mean[c][r]) << ',' << format_double(stddev[c][r]);
    csv << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text_file(out, csv.str());
  }
  std::cerr << files.size() << " runs, " << agg.env_steps.size() << " evaluation points, sigma " << format_double(sigma)
            << "\n";
  if (!agg.env_steps.empty()) {
    std::cerr << "final:";
    for (std::size_t c = 0; c < shown; ++c)
      if (present[c]) std::cerr << "  " << agg.columns[c] << " " << format_double(agg.mean.back()[c]) << " +- "
                                << format_double(agg.stddev.back()[c]);
    std::cerr << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned DQN with autonomous goal selection"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run one seeded training run");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  train->add_option("--config", config_path, "config file (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "overrides the config seed");
  train->add_option("--out", out_dir, "output directory (overrides output_dir)");
  train->add_flag("--quiet", quiet, "no per-evaluation progress lines");

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  std::string checkpoint, goals_path;
  std::size_t episodes = 0;
  eval->add_option("--checkpoint", checkpoint, "checkpoint manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--goals", goals_path, "goal list, one point per line")->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "episodes per goal (default: eval_episodes)");

  auto* agg = app.add_subcommand("aggregate", "cross-seed mean and std per evaluation point");
  std::string runs_glob, agg_out;
  agg->add_option("--runs", runs_glob, "glob of run directories or metrics.csv files")->required();
  agg->add_option("--out", agg_out, "aggregate CSV path")->required();

  auto* report = app.add_subcommand("report", "smoothed summary curves");
  std::string report_glob, report_out;
  double sigma = 0.0;
  report->add_option("--runs", report_glob, "glob of run directories or metrics.csv files")->required();
  report->add_option("--smooth-sigma", sigma, "Gaussian smoothing width in evaluation points")
      ->check(CLI::NonNegativeNumber);
  report->add_option("--out", report_out, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config_path, seed, out_dir, quiet);
    if (*eval) return cmd_eval(checkpoint, goals_path, episodes);
    if (*agg) return cmd_aggregate(runs_glob, agg_out);
    if (*report) return cmd_report(report_glob, sigma, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
