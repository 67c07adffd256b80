#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcrl/config.hpp"
#include "gcrl/dqn.hpp"
#include "gcrl/env.hpp"
#include "gcrl/envs.hpp"
#include "gcrl/error.hpp"
#include "gcrl/goal.hpp"
#include "gcrl/goal_select.hpp"
#include "gcrl/her.hpp"
#include "gcrl/metrics.hpp"
#include "gcrl/random.hpp"

#ifndef GCRL_VERSION
#define GCRL_VERSION "0.0.0-dev"
#endif

namespace gcrl {

// RNG stream ids derived from the run seed.
enum : std::uint64_t {
  kStreamNetworkInit = 1,
  kStreamEpisodes = 2,
  kStreamActions = 3,
  kStreamReplay = 4,
  kStreamGoals = 5,
  kStreamEval = 6,
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct RolloutRequest {
  std::optional<GoalSpec> goal;  // empty: plain (baseline) input
  std::uint64_t seed = 0;
};

struct RolloutResult {
  bool goal_success = false;
  bool task_solved = false;
  double external_return = 0.0;
  std::size_t steps = 0;
};

/// Runs greedy episodes in lockstep so that each environment step is one
/// batched forward pass. A goal that already holds at reset counts as reached
/// with zero steps.
inline std::vector<RolloutResult> greedy_rollouts(const DqnAgent& agent, const Environment& prototype,
                                                  std::span<const RolloutRequest> requests) {
  const SpaceDescriptor& space = prototype.observation_space();
  const std::size_t n = requests.size();
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<Observation> obs(n);
  std::vector<RolloutResult> results(n);
  std::vector<std::size_t> active;
  envs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    envs.push_back(prototype.clone());
    obs[i] = envs[i]->reset(requests[i].seed);
    if (requests[i].goal && evaluate_goal(obs[i], *requests[i].goal, space)) {
      results[i].goal_success = true;
      continue;
    }
    active.push_back(i);
  }
  const std::size_t ew = space.encoding_width();
  while (!active.empty()) {
    const std::size_t width = agent.input_width();
    QNetwork::Batch inputs(static_cast<Eigen::Index>(active.size()), static_cast<Eigen::Index>(width));
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t i = active[k];
      std::span<float> row(inputs.row(static_cast<Eigen::Index>(k)).data(), width);
      space.encode(obs[i], row.first(ew));
      if (requests[i].goal) space.encode(requests[i].goal->point, row.subspan(ew));
    }
    const std::vector<std::size_t> actions = agent.greedy_actions(inputs);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t i = active[k];
      StepOutcome out = envs[i]->step(actions[k]);
      RolloutResult& r = results[i];
      ++r.steps;
      r.external_return += out.external_reward;
      bool done = out.terminated || out.truncated;
      if (requests[i].goal && evaluate_goal(out.next_obs, *requests[i].goal, space)) {
        r.goal_success = true;
        done = true;
      }
      if (out.terminated) r.task_solved = envs[i]->task_solved();
      obs[i] = std::move(out.next_obs);
      if (!done) still.push_back(i);
    }
    active.swap(still);
  }
  return results;
}

struct ExternalEval {
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double success_rate = 0.0;
};

/// Greedy episodes scored by the hidden environment reward. Goal-conditioned
/// agents receive `task_goal` (the environment's own task point) as their goal.
inline ExternalEval evaluate_external(const DqnAgent& agent, const Environment& env, std::size_t episodes,
                                      const std::optional<GoalSpec>& task_goal, std::uint64_t seed) {
  require(episodes > 0, "evaluate_external: need at least one episode");
  std::vector<RolloutRequest> requests;
  for (std::size_t e = 0; e < episodes; ++e) requests.push_back({task_goal, derive_seed(seed, kStreamEval, e)});
  const auto results = greedy_rollouts(agent, env, requests);
  ExternalEval out;
  for (const auto& r : results) {
    out.reward_mean += r.external_return;
    out.success_rate += r.task_solved ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(episodes);
  out.reward_mean /= n;
  out.success_rate /= n;
  for (const auto& r : results) out.reward_std += (r.external_return - out.reward_mean) * (r.external_return - out.reward_mean);
  out.reward_std = std::sqrt(out.reward_std / n);
  return out;
}

struct GoalGridEval {
  std::vector<double> per_goal;
  double average = 0.0;
};

/// Success rate of greedy goal-reaching for each goal in the set.
inline GoalGridEval evaluate_goal_grid(const DqnAgent& agent, const Environment& env, std::span<const GoalSpec> goals,
                                       std::size_t episodes_per_goal, std::uint64_t seed) {
  require(!goals.empty(), "evaluate_goal_grid: empty goal set");
  require(episodes_per_goal > 0, "evaluate_goal_grid: need at least one episode per goal");
  for (const auto& g : goals) require(env.observation_space().contains(g.point), "evaluate_goal_grid: goal outside the space");
  std::vector<RolloutRequest> requests;
  for (const auto& g : goals)
    for (std::size_t e = 0; e < episodes_per_goal; ++e) requests.push_back({g, derive_seed(seed, kStreamEval, e)});
  const auto results = greedy_rollouts(agent, env, requests);
  GoalGridEval out;
  for (std::size_t gi = 0; gi < goals.size(); ++gi) {
    double hits = 0;
    for (std::size_t e = 0; e < episodes_per_goal; ++e) hits += results[gi * episodes_per_goal + e].goal_success ? 1 : 0;
    out.per_goal.push_back(hits / static_cast<double>(episodes_per_goal));
    out.average += out.per_goal.back();
  }
  out.average /= static_cast<double>(goals.size());
  return out;
}

/// Default evaluation goals: every state for discrete spaces; for Mountain
/// Car a 4 x 3 position x velocity lattice that contains both summits at rest.
inline std::vector<Observation> default_eval_goals(const Environment& env) {
  const SpaceDescriptor& space = env.observation_space();
  std::vector<Observation> goals;
  if (space.is_discrete()) {
    for (std::size_t s = 0; s < space.n_states(); ++s) goals.push_back(Observation::discrete(s));
    return goals;
  }
  if (const auto* pmc = dynamic_cast<const PathologicalMountainCar*>(&env)) {
    const auto& p = pmc->params();
    const double span = p.easy_goal_x - p.hard_goal_x;
    for (double v : {-0.035, 0.0, 0.035})
      for (int i = 0; i < 4; ++i) goals.push_back(Observation::box({p.hard_goal_x + span * i / 3.0, v}));
    return goals;
  }
  // generic box: 3 points per dimension along the diagonal of the space
  for (double u : {0.25, 0.5, 0.75}) {
    std::vector<double> v;
    for (std::size_t d = 0; d < space.dimension(); ++d) v.push_back(space.low()[d] + u * (space.high()[d] - space.low()[d]));
    goals.push_back(Observation::box(std::move(v)));
  }
  return goals;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingSummary {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t goal_successes = 0;
  std::uint64_t task_solved_episodes = 0;  // episodes that ended by completing the environment's task
  std::optional<std::uint64_t> first_task_solved_step;
  double best_external_return = -std::numeric_limits<double>::infinity();
  std::uint64_t gradient_updates = 0;
  std::uint64_t goal_fallbacks = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  RunConfig config;
  MetricsTable metrics;
  TrainingSummary summary;
  std::optional<std::string> aborted;  // set when training diverged
  std::unique_ptr<DqnAgent> agent;
};

inline std::unique_ptr<Environment> make_environment(const RunConfig& config) {
  return make_environment(config.env, config.env_options);
}

inline NetworkShape network_shape_for(const RunConfig& config, const Environment& env) {
  const std::size_t w = env.observation_space().encoding_width();
  return {config.arch, config.mode == Mode::goal_conditioned ? 2 * w : w, env.action_count(), config.hidden_width};
}

inline std::vector<GoalSpec> resolve_eval_goals(const RunConfig& config, const Environment& env) {
  std::vector<GoalSpec> goals;
  if (config.eval_goals.empty()) {
    for (auto& g : default_eval_goals(env)) goals.push_back({std::move(g), config.goal_tolerance});
  } else {
    for (const auto& text : config.eval_goals) goals.push_back({env.observation_space().parse(text), config.goal_tolerance});
  }
  return goals;
}

inline GoalSpec resolve_task_goal(const RunConfig& config, const Environment& env) {
  const Observation point =
      config.external_goal.empty() ? env.external_goal() : env.observation_space().parse(config.external_goal);
  return {point, config.goal_tolerance};
}

using EvalCallback = std::function<void(const EvalRecord&, const TrainingSummary&)>;

inline EvalRecord evaluate_agent(const DqnAgent& agent, const Environment& env, const RunConfig& config,
                                 std::span<const GoalSpec> eval_goals, std::uint64_t env_steps) {
  EvalRecord rec;
  rec.env_steps = env_steps;
  const std::uint64_t eval_seed = derive_seed(config.seed, kStreamEval);
  std::optional<GoalSpec> task_goal;
  if (config.mode == Mode::goal_conditioned) task_goal = resolve_task_goal(config, env);
  const ExternalEval ext = evaluate_external(agent, env, config.eval_episodes, task_goal, eval_seed);
  rec.ext_reward_mean = ext.reward_mean;
  rec.ext_reward_std = ext.reward_std;
  rec.ext_success = ext.success_rate;
  if (config.mode == Mode::goal_conditioned) {
    const GoalGridEval grid = evaluate_goal_grid(agent, env, eval_goals, config.eval_episodes, eval_seed);
    rec.avg_goal_success = grid.average;
    rec.per_goal_success = grid.per_goal;
  }
  return rec;
}

/// The full training loop for one (config, seed): goal selection, rollout,
/// statistics, hindsight storage, scheduled DQN updates and periodic greedy
/// evaluation. `prototype` supplies the environment; its external reward
/// reaches only logs and evaluation records in goal-conditioned mode.
inline RunResult run_training(const RunConfig& config, const Environment& prototype,
                              const EvalCallback& on_eval = {}) {
  const auto wall_start = std::chrono::steady_clock::now();
  config.selection.validate();
  config.agent.validate();
  require(config.total_steps > 0, "total_steps must be positive");
  require(config.eval_episodes > 0, "eval_episodes must be positive");
  require(config.agent.batch_size <= config.buffer_size, "batch_size must not exceed buffer_size");

  const bool goal_mode = config.mode == Mode::goal_conditioned;
  const SpaceDescriptor& space = prototype.observation_space();

  RunResult result;
  result.config = config;
  result.agent = std::make_unique<DqnAgent>(network_shape_for(config, prototype), config.agent,
                                            derive_seed(config.seed, kStreamNetworkInit));
  DqnAgent& agent = *result.agent;

  const std::vector<GoalSpec> eval_goals = goal_mode ? resolve_eval_goals(config, prototype) : std::vector<GoalSpec>{};
  if (goal_mode)
    for (const auto& g : eval_goals) result.metrics.goal_labels.push_back(goal_label(g.point));

  std::vector<std::size_t> bins = config.grid_bins;
  if (!space.is_discrete() && bins.empty()) bins.assign(space.dimension(), 100);
  GridStats stats(space, bins);
  HindsightReplayBuffer buffer(space, config.buffer_size, goal_mode ? config.relabel_probability() : 0.0);

  Rng episode_rng(derive_seed(config.seed, kStreamEpisodes));
  Rng action_rng(derive_seed(config.seed, kStreamActions));
  Rng replay_rng(derive_seed(config.seed, kStreamReplay));
  Rng goal_rng(derive_seed(config.seed, kStreamGoals));

  GoalWrapper wrapper(prototype.clone());
  std::unique_ptr<Environment> plain = prototype.clone();

  const std::size_t eval_interval = config.resolved_eval_interval();
  const AgentHyperparams& hp = config.agent;
  TrainingSummary& summary = result.summary;
  std::uint64_t steps = 0;
  std::uint64_t episode_id = 0;
  std::vector<Transition> episode;

  auto finish = [&] {
    summary.env_steps = steps;
    summary.gradient_updates = agent.updates();
    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  };

  try {
    while (steps < config.total_steps) {
      const std::uint64_t episode_seed = episode_rng();
      episode.clear();
      Observation obs;
      std::optional<GoalSpec> goal;
      std::vector<float> input;
      if (goal_mode) {
        obs = wrapper.reset(episode_seed);
        GoalChoice choice = select_goal(config.strategy, stats, config.selection, config.goal_tolerance, goal_rng);
        if (choice.source == GoalSource::fallback) ++summary.goal_fallbacks;
        goal = choice.goal;
        wrapper.set_goal(choice.goal);
        input = wrapper.augment(obs);
      } else {
        obs = plain->reset(episode_seed);
        input = space.encode(obs);
      }

      double episode_return = 0.0;
      bool success = false;
      bool task_solved = false;
      for (;;) {
        const double eps = exploration_epsilon(steps, config.total_steps, hp);
        const std::size_t action = agent.act(input, eps, action_rng);
        Transition t;
        t.obs = obs;
        t.goal = goal;
        t.action = action;
        t.episode_id = episode_id;
        t.step_in_episode = episode.size();
        bool done = false;
        if (goal_mode) {
          GoalStepOutcome out = wrapper.step(action);
          t.reward = out.internal_reward;
          t.terminal = out.terminated;
          t.env_terminated = out.env_terminated;
          t.next_obs = out.next_obs;
          episode_return += out.hidden_external_reward;
          success = out.goal_success;
          if (out.env_terminated) task_solved = wrapper.inner().task_solved();
          input = std::move(out.augmented_obs);
          done = out.terminated || out.truncated;
        } else {
          StepOutcome out = plain->step(action);
          t.reward = out.external_reward;
          t.terminal = out.terminated;
          t.env_terminated = out.terminated;
          t.next_obs = out.next_obs;
          episode_return += out.external_reward;
          if (out.terminated) task_solved = plain->task_solved();
          input = space.encode(out.next_obs);
          done = out.terminated || out.truncated;
        }
        stats.record_step(t.next_obs);
        obs = t.next_obs;
        episode.push_back(std::move(t));

        ++steps;
        agent.observe_env_step();
        if (task_solved && !summary.first_task_solved_step) summary.first_task_solved_step = steps;

        if (steps % hp.train_freq == 0 && steps >= hp.learning_starts && buffer.size() > 0) {
          for (std::size_t g = 0; g < hp.gradient_steps; ++g) {
            const auto samples = buffer.sample_batch(hp.batch_size, replay_rng);
            agent.train_step(make_training_batch(samples, space));
          }
        }
        agent.maybe_update_target();

        if (steps % eval_interval == 0 || steps == config.total_steps) {
          EvalRecord rec = evaluate_agent(agent, prototype, config, eval_goals, steps);
          result.metrics.records.push_back(rec);
          if (on_eval) {
            finish();
            on_eval(rec, summary);
          }
        }
        if (done || steps >= config.total_steps) break;
      }

      if (goal_mode) stats.record_goal_outcome(goal->point, success);
      buffer.append_episode(episode);
      ++summary.episodes;
      ++episode_id;
      if (success) ++summary.goal_successes;
      if (task_solved) ++summary.task_solved_episodes;
      summary.best_external_return = std::max(summary.best_external_return, episode_return);
    }
  } catch (const TrainingDivergence& e) {
    result.aborted = e.what();
  }
  finish();
  return result;
}

inline RunResult run_training(const RunConfig& config, const EvalCallback& on_eval = {}) {
  const auto env = make_environment(config);
  return run_training(config, *env, on_eval);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json run_manifest(const RunResult& run) {
  nlohmann::ordered_json j;
  j["code_version"] = GCRL_VERSION;
  j["status"] = run.aborted ? "aborted" : "complete";
  if (run.aborted) j["error"] = *run.aborted;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : to_key_values(run.config)) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json env;
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#else
  env["compiler"] = "unknown";
#endif
  env["cplusplus"] = __cplusplus;
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
  j["environment"] = env;
  const TrainingSummary& s = run.summary;
  nlohmann::ordered_json tr;
  tr["env_steps"] = s.env_steps;
  tr["episodes"] = s.episodes;
  tr["goal_successes"] = s.goal_successes;
  tr["task_solved_episodes"] = s.task_solved_episodes;
  if (s.first_task_solved_step) tr["first_task_solved_step"] = *s.first_task_solved_step;
  if (std::isfinite(s.best_external_return)) tr["best_external_return"] = s.best_external_return;
  tr["gradient_updates"] = s.gradient_updates;
  tr["goal_fallbacks"] = s.goal_fallbacks;
  tr["wall_seconds"] = s.wall_seconds;
  j["training"] = tr;
  return j;
}

/// Writes metrics.csv and manifest.json into `dir`; an aborted run also gets
/// a PARTIAL marker file.
inline void emit_metrics(const RunResult& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  write_text_file(dir / "metrics.csv", to_csv(run.metrics));
  write_text_file(dir / "manifest.json", run_manifest(run).dump(2) + "\n");
  if (run.aborted) write_text_file(dir / "PARTIAL", *run.aborted + "\n");
}

/// Checkpoint = `<stem>.qnet` parameter file plus a `<stem>.manifest`
/// key-value file holding the run config, the step count and the parameter
/// file name. load_checkpoint() rebuilds the agent and the config from it.
inline void save_checkpoint(const DqnAgent& agent, const RunConfig& config, std::uint64_t env_steps,
                            const std::filesystem::path& manifest_path) {
  std::filesystem::path params = manifest_path;
  params.replace_extension(".qnet");
  agent.online().save(params);
  std::string text = "# gcrl checkpoint manifest\n";
  text += "params_file = " + params.filename().string() + "\n";
  text += "checkpoint_env_steps = " + std::to_string(env_steps) + "\n";
  text += format_config(config);
  write_text_file(manifest_path, text);
}

struct LoadedCheckpoint {
  RunConfig config;
  std::uint64_t env_steps = 0;
  std::unique_ptr<DqnAgent> agent;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  KeyValues kv = parse_key_values(read_text_file(manifest_path));
  std::string params_file;
  LoadedCheckpoint out;
  KeyValues config_kv;
  for (auto& [k, v] : kv) {
    if (k == "params_file") params_file = v;
    else if (k == "checkpoint_env_steps") out.env_steps = std::stoull(v);
    else config_kv.emplace_back(k, v);
  }
  require(!params_file.empty(), "checkpoint manifest lacks params_file");
  out.config = config_from_key_values(config_kv);
  const auto env = make_environment(out.config);
  out.agent = std::make_unique<DqnAgent>(network_shape_for(out.config, *env), out.config.agent, 0);
  QNetwork net = QNetwork::load(manifest_path.parent_path() / params_file);
  require(net.shape() == out.agent->online().shape(), "checkpoint network does not match its manifest");
  out.agent->online().copy_parameters_from(net);
  out.agent->sync_target();
  return out;
}

}  // namespace gcrl
