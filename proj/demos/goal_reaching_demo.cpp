// Trains a small goal-conditioned agent on Cliff Walking and prints which
// cells the greedy policy can reach afterwards.
//
//   goal_reaching_demo [steps] [seed]

#include <cstdlib>
#include <iostream>

#include "gcrl/harness.hpp"

int main(int argc, char** argv) {
  using namespace gcrl;
  RunConfig config = defaults_for("cliff_walking");
  config.total_steps = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 60'000;
  config.seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
  config.strategy = Strategy::novelty;
  config.agent.gradient_steps = 8;
  config.agent.target_update_interval = 2'000;
  config.eval_interval = config.total_steps / 10;
  config.eval_episodes = 1;
  config.buffer_size = 200'000;

  RunResult run = run_training(config, [](const EvalRecord& r, const TrainingSummary&) {
    std::cout << "step " << r.env_steps << ": return to the task goal " << r.ext_reward_mean
              << ", goals reached " << *r.avg_goal_success * 48 << "/48\n";
  });

  const auto env = make_environment(config);
  const std::vector<GoalSpec> goals = resolve_eval_goals(config, *env);
  const GoalGridEval grid = evaluate_goal_grid(*run.agent, *env, goals, 1, 0);
  std::cout << "\nreachable goals (o), missed (.), cliff (C):\n";
  for (std::size_t row = 0; row < 4; ++row) {
    for (std::size_t col = 0; col < 12; ++col) {
      const std::size_t s = row * 12 + col;
      std::cout << (CliffWalking::is_cliff(s) ? 'C' : grid.per_goal[s] > 0 ? 'o' : '.');
    }
    std::cout << '\n';
  }
  return 0;
}
