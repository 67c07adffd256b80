#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>

#include "gcrl/env.hpp"

namespace gcrl {

// ---------------------------------------------------------------------------
// Cliff Walking: 4x12 grid, start bottom-left (36), goal bottom-right (47),
// cliff cells 37..46. Walking into the cliff costs -100 and sends the agent
// back to the start without ending the episode.
// ---------------------------------------------------------------------------
class CliffWalking final : public Environment {
 public:
  static constexpr std::size_t kRows = 4;
  static constexpr std::size_t kCols = 12;
  static constexpr std::size_t kStart = 36;
  static constexpr std::size_t kGoal = 47;
  static constexpr std::size_t kStepLimit = 300;

  enum Action : std::size_t { up = 0, right = 1, down = 2, left = 3 };

  CliffWalking() : Environment(kStepLimit), space_(SpaceDescriptor::discrete(kRows * kCols)) {}

  static constexpr bool is_cliff(std::size_t s) noexcept { return s > kStart && s < kGoal; }

  /// Deterministic move with edge clamping; no cliff handling.
  static constexpr std::size_t move(std::size_t s, std::size_t action) noexcept {
    std::size_t row = s / kCols;
    std::size_t col = s % kCols;
    switch (action) {
      case up: row = row > 0 ? row - 1 : 0; break;
      case right: col = std::min(col + 1, kCols - 1); break;
      case down: row = std::min(row + 1, kRows - 1); break;
      case left: col = col > 0 ? col - 1 : 0; break;
      default: break;
    }
    return row * kCols + col;
  }

  const SpaceDescriptor& observation_space() const override { return space_; }
  std::size_t action_count() const override { return 4; }
  std::string_view name() const override { return "cliff_walking"; }
  Observation external_goal() const override { return Observation::discrete(kGoal); }
  bool task_solved() const override { return state_ == kGoal; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CliffWalking>(*this); }

  std::size_t state() const noexcept { return state_; }

  /// Test hook: place the agent on a non-cliff cell mid-episode.
  void set_state(std::size_t s) {
    require(s < kRows * kCols && !is_cliff(s), "CliffWalking::set_state invalid cell");
    state_ = s;
  }

 protected:
  Observation do_reset(Rng&) override {
    state_ = kStart;
    return Observation::discrete(state_);
  }

  StepOutcome do_step(std::size_t action, Rng&) override {
    std::size_t next = move(state_, action);
    StepOutcome out;
    if (is_cliff(next)) {
      state_ = kStart;
      out.external_reward = -100.0;
    } else {
      state_ = next;
      out.external_reward = -1.0;
      out.terminated = state_ == kGoal;
    }
    out.next_obs = Observation::discrete(state_);
    return out;
  }

 private:
  SpaceDescriptor space_;
  std::size_t state_ = kStart;
};

// ---------------------------------------------------------------------------
// Frozen Lake, canonical 4x4 map
//   S F F F
//   F H F H
//   F F F H
//   H F F G
// Slippery: the realized direction is the intended one or either
// perpendicular one with probability 1/3 each. Holes and the goal absorb.
// ---------------------------------------------------------------------------
class FrozenLake final : public Environment {
 public:
  static constexpr std::size_t kSide = 4;
  static constexpr std::size_t kGoal = 15;
  static constexpr std::size_t kStepLimit = 100;
  static constexpr std::array<std::size_t, 4> kHoles{5, 7, 11, 12};

  enum Action : std::size_t { left = 0, down = 1, right = 2, up = 3 };

  explicit FrozenLake(bool slippery = true)
      : Environment(kStepLimit), space_(SpaceDescriptor::discrete(kSide * kSide)), slippery_(slippery) {}

  static constexpr bool is_hole(std::size_t s) noexcept {
    return std::find(kHoles.begin(), kHoles.end(), s) != kHoles.end();
  }

  static constexpr std::size_t move(std::size_t s, std::size_t direction) noexcept {
    std::size_t row = s / kSide;
    std::size_t col = s % kSide;
    switch (direction) {
      case left: col = col > 0 ? col - 1 : 0; break;
      case down: row = std::min(row + 1, kSide - 1); break;
      case right: col = std::min(col + 1, kSide - 1); break;
      case up: row = row > 0 ? row - 1 : 0; break;
      default: break;
    }
    return row * kSide + col;
  }

  /// The three directions a slippery move may realize, in sampling order.
  static constexpr std::array<std::size_t, 3> slip_directions(std::size_t action) noexcept {
    return {(action + 3) % 4, action, (action + 1) % 4};
  }

  const SpaceDescriptor& observation_space() const override { return space_; }
  std::size_t action_count() const override { return 4; }
  std::string_view name() const override { return "frozen_lake"; }
  Observation external_goal() const override { return Observation::discrete(kGoal); }
  bool task_solved() const override { return state_ == kGoal; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<FrozenLake>(*this); }

  std::size_t state() const noexcept { return state_; }
  std::size_t last_direction() const noexcept { return last_direction_; }

  void set_state(std::size_t s) {
    require(s < kSide * kSide && !is_hole(s) && s != kGoal, "FrozenLake::set_state invalid cell");
    state_ = s;
  }

 protected:
  Observation do_reset(Rng&) override {
    state_ = 0;
    return Observation::discrete(state_);
  }

  StepOutcome do_step(std::size_t action, Rng& rng) override {
    std::size_t direction = action;
    if (slippery_) direction = slip_directions(action)[uniform_index(rng, 3)];
    last_direction_ = direction;
    state_ = move(state_, direction);
    StepOutcome out;
    out.next_obs = Observation::discrete(state_);
    out.terminated = is_hole(state_) || state_ == kGoal;
    out.external_reward = state_ == kGoal ? 1.0 : 0.0;
    return out;
  }

 private:
  SpaceDescriptor space_;
  bool slippery_;
  std::size_t state_ = 0;
  std::size_t last_direction_ = 0;
};

// ---------------------------------------------------------------------------
// Pathological Mountain Car: Mountain Car with a constant slope added to the
// height profile. The left (hard) summit at x <= -1.6 pays 500, the right
// (easy) summit at x >= 0.5 pays 10, every other step pays 0.
// ---------------------------------------------------------------------------
struct MountainCarParams {
  double tilt = 0.0005;  // constant acceleration toward +x; 0 gives the plain Mountain Car force
  double x_min = -1.8;
  double x_max = 0.6;
  double max_speed = 0.07;
  double force = 0.001;
  double gravity = 0.0025;
  double hard_goal_x = -1.6;
  double easy_goal_x = 0.5;
  double hard_reward = 500.0;
  double easy_reward = 10.0;
  std::size_t step_limit = 300;
};

class PathologicalMountainCar final : public Environment {
 public:
  enum Action : std::size_t { push_left = 0, coast = 1, push_right = 2 };

  explicit PathologicalMountainCar(MountainCarParams params = {})
      : Environment(params.step_limit),
        params_(params),
        space_(SpaceDescriptor::box({params.x_min, -params.max_speed}, {params.x_max, params.max_speed})) {}

  /// One deterministic dynamics update; shared by step() and tests.
  static void integrate(const MountainCarParams& p, double& x, double& v, std::size_t action) {
    v += (static_cast<double>(action) - 1.0) * p.force - p.gravity * std::cos(3.0 * x) + p.tilt;
    v = std::clamp(v, -p.max_speed, p.max_speed);
    x += v;
    x = std::clamp(x, p.x_min, p.x_max);
    if (x == p.x_min && v < 0) v = 0;
  }

  /// Height profile whose slope yields the force above (up to the gravity scale).
  static double height(const MountainCarParams& p, double x) {
    return std::sin(3.0 * x) / 3.0 - (p.tilt / p.gravity) * x;
  }

  const SpaceDescriptor& observation_space() const override { return space_; }
  std::size_t action_count() const override { return 3; }
  std::string_view name() const override { return "pathological_mountain_car"; }
  Observation external_goal() const override { return Observation::box({params_.hard_goal_x, 0.0}); }
  bool task_solved() const override { return x_ <= params_.hard_goal_x; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<PathologicalMountainCar>(*this);
  }

  const MountainCarParams& params() const noexcept { return params_; }
  double position() const noexcept { return x_; }
  double velocity() const noexcept { return v_; }

  void set_state(double x, double v) {
    require(x >= params_.x_min && x <= params_.x_max && std::abs(v) <= params_.max_speed,
            "PathologicalMountainCar::set_state out of range");
    x_ = x;
    v_ = v;
  }

 protected:
  Observation do_reset(Rng& rng) override {
    x_ = std::uniform_real_distribution<double>(-0.6, -0.4)(rng);
    v_ = 0.0;
    return Observation::box({x_, v_});
  }

  StepOutcome do_step(std::size_t action, Rng&) override {
    integrate(params_, x_, v_, action);
    StepOutcome out;
    out.next_obs = Observation::box({x_, v_});
    if (x_ <= params_.hard_goal_x) {
      out.terminated = true;
      out.external_reward = params_.hard_reward;
    } else if (x_ >= params_.easy_goal_x) {
      out.terminated = true;
      out.external_reward = params_.easy_reward;
    }
    return out;
  }

 private:
  MountainCarParams params_;
  SpaceDescriptor space_;
  double x_ = -0.5;
  double v_ = 0.0;
};

struct EnvironmentOptions {
  MountainCarParams mountain_car{};
  bool frozen_lake_slippery = true;
};

/// Builds an environment from its config name:
/// "cliff_walking" | "frozen_lake" | "pathological_mountain_car".
inline std::unique_ptr<Environment> make_environment(std::string_view name,
                                                     const EnvironmentOptions& options = {}) {
  if (name == "cliff_walking") return std::make_unique<CliffWalking>();
  if (name == "frozen_lake") return std::make_unique<FrozenLake>(options.frozen_lake_slippery);
  if (name == "pathological_mountain_car")
    return std::make_unique<PathologicalMountainCar>(options.mountain_car);
  throw ContractViolation("unknown environment '" + std::string(name) + "'");
}

}  // namespace gcrl
