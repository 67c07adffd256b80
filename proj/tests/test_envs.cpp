#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <deque>
#include <set>

#include "gcrl/envs.hpp"
#include "oracles.hpp"

using namespace gcrl;

TEST(CliffWalking, ResetAlwaysAtStart) {
  CliffWalking env;
  for (std::uint64_t s = 0; s < 5; ++s) EXPECT_EQ(env.reset(s).index(), 36u);
}

TEST(CliffWalking, StepExamples) {
  CliffWalking env;
  env.reset(0);
  StepOutcome out = env.step(CliffWalking::right);
  EXPECT_EQ(out.next_obs.index(), 36u);
  EXPECT_EQ(out.external_reward, -100.0);
  EXPECT_FALSE(out.terminated);

  env.reset(0);
  out = env.step(CliffWalking::up);
  EXPECT_EQ(out.next_obs.index(), 24u);
  EXPECT_EQ(out.external_reward, -1.0);

  env.reset(0);
  env.set_state(35);
  out = env.step(CliffWalking::down);
  EXPECT_EQ(out.next_obs.index(), 47u);
  EXPECT_TRUE(out.terminated);
  EXPECT_TRUE(env.task_solved());
}

TEST(CliffWalking, EdgesClamp) {
  CliffWalking env;
  env.reset(0);
  env.set_state(0);
  EXPECT_EQ(env.step(CliffWalking::up).next_obs.index(), 0u);
  EXPECT_EQ(env.step(CliffWalking::left).next_obs.index(), 0u);
  env.set_state(11);
  EXPECT_EQ(env.step(CliffWalking::right).next_obs.index(), 11u);
}

TEST(CliffWalking, ReachableStatesMatchBfsOracle) {
  const std::set<std::size_t> oracle = oracle::cliff_reachable_states();
  EXPECT_EQ(oracle.size(), 38u);
  // the environment itself, explored breadth-first through set_state
  std::set<std::size_t> seen = {36};
  std::deque<std::size_t> frontier = {36};
  CliffWalking env;
  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop_front();
    if (s == 47) continue;
    for (std::size_t a = 0; a < 4; ++a) {
      env.reset(0);
      env.set_state(s);
      const std::size_t next = env.step(a).next_obs.index();
      EXPECT_FALSE(CliffWalking::is_cliff(next));
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  EXPECT_EQ(seen, oracle);
}

TEST(CliffWalking, OptimalReturnIsMinus13) {
  EXPECT_EQ(oracle::cliff_shortest_path(36, 47), 13u);
  CliffWalking env;
  env.reset(0);
  double ret = 0;
  StepOutcome out = env.step(CliffWalking::up);
  ret += out.external_reward;
  for (int i = 0; i < 11; ++i) ret += env.step(CliffWalking::right).external_reward;
  out = env.step(CliffWalking::down);
  ret += out.external_reward;
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(ret, -13.0);
}

TEST(CliffWalking, TruncatesAtStep300) {
  CliffWalking env;
  env.reset(0);
  for (int t = 1; t < 300; ++t) {
    const StepOutcome out = env.step(CliffWalking::up);
    ASSERT_FALSE(out.truncated) << "step " << t;
  }
  const StepOutcome last = env.step(CliffWalking::up);
  EXPECT_TRUE(last.truncated);
  EXPECT_FALSE(last.terminated);
  EXPECT_THROW(env.step(CliffWalking::up), ContractViolation);
}

TEST(CliffWalking, RejectsBadAction) {
  CliffWalking env;
  env.reset(0);
  EXPECT_THROW(env.step(4), ContractViolation);
}

TEST(FrozenLake, ResetAndTerminalCells) {
  FrozenLake env;
  EXPECT_EQ(env.reset(3).index(), 0u);

  FrozenLake det(false);
  det.reset(0);
  det.set_state(1);
  StepOutcome out = det.step(FrozenLake::down);
  EXPECT_EQ(out.next_obs.index(), 5u);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.external_reward, 0.0);

  det.reset(0);
  det.set_state(14);
  out = det.step(FrozenLake::right);
  EXPECT_EQ(out.next_obs.index(), 15u);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.external_reward, 1.0);
}

TEST(FrozenLake, TruncatesAtStep100) {
  FrozenLake env(false);
  env.reset(0);
  for (int t = 1; t < 100; ++t) ASSERT_FALSE(env.step(FrozenLake::left).truncated);
  EXPECT_TRUE(env.step(FrozenLake::left).truncated);
}

namespace {

// Realized slip directions over n steps from state s with action a.
std::array<int, 3> slip_counts(std::size_t s, std::size_t a, int n) {
  FrozenLake env;
  const auto dirs = oracle::frozen_slip_directions(a);
  std::array<int, 3> counts{};
  env.reset(1000 * s + a);
  for (int i = 0; i < n; ++i) {
    if (!env.running()) env.reset(1000 * s + a + 7919 * static_cast<std::uint64_t>(i));
    env.set_state(s);
    env.step(a);
    const auto it = std::find(dirs.begin(), dirs.end(), env.last_direction());
    if (it == dirs.end()) {
      ADD_FAILURE() << "direction outside the slip set, state " << s << " action " << a;
      return counts;
    }
    ++counts[static_cast<std::size_t>(it - dirs.begin())];
  }
  return counts;
}

}  // namespace

TEST(FrozenLake, SlipFrequenciesWithinThreeSigma) {
  const int n = 30000;
  const double expected = n / 3.0;
  const double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
  for (int c : slip_counts(6, FrozenLake::down, n)) EXPECT_LE(std::abs(c - expected), 3 * sigma);
}

// Goodness of fit against 1/3 each for every non-terminal state and action.
TEST(FrozenLake, SlipKernelIsUniformEverywhere) {
  const int n = 30000;
  double min_p = 1.0;
  for (std::size_t s = 0; s < 16; ++s) {
    if (FrozenLake::is_hole(s) || s == FrozenLake::kGoal) continue;
    for (std::size_t a = 0; a < 4; ++a) {
      double stat = 0;
      const double expected = n / 3.0;
      for (int c : slip_counts(s, a, n)) stat += (c - expected) * (c - expected) / expected;
      const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), stat));
      EXPECT_GT(p, 0.001) << "state " << s << " action " << a;
      min_p = std::min(min_p, p);
    }
  }
  RecordProperty("min_p", std::to_string(min_p));
}

TEST(FrozenLake, SeedDeterminism) {
  auto trace = [](std::uint64_t seed) {
    FrozenLake env;
    env.reset(seed);
    std::vector<std::size_t> states;
    for (int i = 0; i < 50 && env.running(); ++i) states.push_back(env.step(i % 4).next_obs.index());
    return states;
  };
  EXPECT_EQ(trace(5), trace(5));
}

TEST(FrozenLake, ValueIterationOptimumNearPointSeven) {
  const double v = oracle::frozen_lake_optimal_success(100);
  EXPECT_NEAR(v, 0.7, 0.05);
}

TEST(MountainCar, ZeroTiltReducesToCanonicalUpdate) {
  MountainCarParams p;
  p.tilt = 0.0;
  p.x_min = -1.2;
  Rng rng(3);
  double worst = 0;
  for (int episode = 0; episode < 200; ++episode) {
    double x = std::uniform_real_distribution<double>(-1.2, 0.6)(rng);
    double v = std::uniform_real_distribution<double>(-0.07, 0.07)(rng);
    double cx = x, cv = v;
    for (int t = 0; t < 200; ++t) {
      const std::size_t a = uniform_index(rng, 3);
      PathologicalMountainCar::integrate(p, x, v, a);
      oracle::canonical_mountain_car_step(cx, cv, a);
      worst = std::max({worst, std::abs(x - cx), std::abs(v - cv)});
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(MountainCar, TiltedValleyFloorIsEquilibrium) {
  MountainCarParams p;
  // 0.0025 cos(3x) = k at the floor
  const double x0 = -std::acos(p.tilt / p.gravity) / 3.0;
  double x = x0, v = 0.0;
  PathologicalMountainCar::integrate(p, x, v, PathologicalMountainCar::coast);
  EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_NEAR(x, x0, 1e-15);
}

TEST(MountainCar, SummitsTerminateWithTheirRewards) {
  PathologicalMountainCar env;
  env.reset(0);
  env.set_state(-1.59, -0.02);
  StepOutcome out = env.step(PathologicalMountainCar::push_left);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.external_reward, 500.0);
  EXPECT_TRUE(env.task_solved());

  env.reset(0);
  env.set_state(0.49, 0.03);
  out = env.step(PathologicalMountainCar::push_right);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.external_reward, 10.0);
  EXPECT_FALSE(env.task_solved());
}

TEST(MountainCar, ResetRangeAndVelocityClip) {
  PathologicalMountainCar env;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Observation o = env.reset(s);
    EXPECT_GE(o.values()[0], -0.6);
    EXPECT_LE(o.values()[0], -0.4);
    EXPECT_EQ(o.values()[1], 0.0);
  }
  env.reset(0);
  env.set_state(-0.5, 0.0699);
  const StepOutcome out = env.step(PathologicalMountainCar::push_right);
  EXPECT_LE(out.next_obs.values()[1], 0.07);
}

TEST(MountainCar, NonTerminalTrajectoriesPayNothing) {
  PathologicalMountainCar env;
  Rng rng(9);
  for (int e = 0; e < 50; ++e) {
    env.reset(static_cast<std::uint64_t>(e));
    double ret = 0;
    bool terminated = false;
    while (env.running()) {
      const StepOutcome out = env.step(uniform_index(rng, 3));
      ret += out.external_reward;
      terminated = terminated || out.terminated;
    }
    if (!terminated) {
      EXPECT_EQ(ret, 0.0);
    }
  }
}

// The hard summit sits higher on the tilted profile and, among pumping
// policies that brake their rightward swings past a threshold c, needs more
// swing reversals and more steps than the easy summit.
TEST(MountainCar, HardSummitNeedsMoreSwingUps) {
  MountainCarParams p;
  const double floor = -std::acos(p.tilt / p.gravity) / 3.0;
  const double easy_barrier = PathologicalMountainCar::height(p, p.easy_goal_x) - PathologicalMountainCar::height(p, floor);
  const double hard_barrier = PathologicalMountainCar::height(p, p.hard_goal_x) - PathologicalMountainCar::height(p, floor);
  EXPECT_GT(hard_barrier, 1.5 * easy_barrier);

  const oracle::SwingSearch s = oracle::pmc_swing_search(p);
  ASSERT_TRUE(s.easy && s.hard);
  EXPECT_GT(s.hard->reversals, s.easy->reversals);
  EXPECT_GT(s.hard->steps, s.easy->steps);
}
