#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gcrl/env.hpp"
#include "gcrl/error.hpp"
#include "gcrl/space.hpp"

namespace gcrl {

struct GoalSpec {
  Observation point;
  double tolerance = 0.1;  // normalized units; ignored for discrete spaces
};

/// Euclidean norm of the per-dimension min-max-normalized difference.
inline double normalized_distance(const Observation& a, const Observation& b, const SpaceDescriptor& space) {
  require(!space.is_discrete(), "normalized_distance needs a box space");
  require(space.same_kind(a) && space.same_kind(b), "normalized_distance: observation/space mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const double d = (a.values()[i] - b.values()[i]) / (space.high()[i] - space.low()[i]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

/// Exact match for discrete spaces, normalized distance < tolerance for boxes.
inline bool evaluate_goal(const Observation& obs, const GoalSpec& goal, const SpaceDescriptor& space) {
  require(space.same_kind(obs) && space.same_kind(goal.point), "evaluate_goal: space mismatch");
  if (space.is_discrete()) return obs.index() == goal.point.index();
  return normalized_distance(obs, goal.point, space) < goal.tolerance;
}

/// Learner input: encoded observation, followed by the encoded goal when one is given.
inline std::vector<float> encode_input(const SpaceDescriptor& space, const Observation& obs,
                                       const Observation* goal) {
  const std::size_t w = space.encoding_width();
  std::vector<float> out(goal ? 2 * w : w);
  space.encode(obs, std::span<float>(out).first(w));
  if (goal) space.encode(*goal, std::span<float>(out).subspan(w));
  return out;
}

struct GoalStepOutcome {
  std::vector<float> augmented_obs;
  Observation next_obs;
  double internal_reward = 0.0;
  bool goal_success = false;
  bool terminated = false;
  bool env_terminated = false;  // the inner environment's own termination
  bool truncated = false;
  double hidden_external_reward = 0.0;  // for logs only
};

/// Turns any Environment into a goal-conditioned one: the learner sees the
/// observation concatenated with the episode goal, earns 1 on reaching the
/// goal (which ends the episode) and 0 otherwise.
class GoalWrapper {
 public:
  explicit GoalWrapper(std::unique_ptr<Environment> inner) : inner_(std::move(inner)) {
    require(inner_ != nullptr, "GoalWrapper needs an environment");
  }

  Observation reset(std::uint64_t seed) {
    goal_.reset();
    stepped_ = false;
    obs_ = inner_->reset(seed);
    return obs_;
  }

  void set_goal(GoalSpec goal) {
    require(inner_->running() && !stepped_, "set_goal must be called after reset and before the first step");
    require(space().contains(goal.point), "set_goal: goal outside the observation space");
    require(space().is_discrete() || goal.tolerance > 0, "set_goal: box goals need a positive tolerance");
    goal_ = std::move(goal);
    goal_code_ = space().encode(goal_->point);
  }

  GoalStepOutcome step(std::size_t action) {
    require(goal_.has_value(), "GoalWrapper::step without an active goal");
    stepped_ = true;
    StepOutcome inner = inner_->step(action);
    GoalStepOutcome out;
    out.goal_success = evaluate_goal(inner.next_obs, *goal_, space());
    out.internal_reward = out.goal_success ? 1.0 : 0.0;
    out.env_terminated = inner.terminated;
    out.terminated = out.goal_success || inner.terminated;
    out.truncated = !out.terminated && inner.truncated;
    out.hidden_external_reward = inner.external_reward;
    out.augmented_obs = augment(inner.next_obs);
    out.next_obs = std::move(inner.next_obs);
    obs_ = out.next_obs;
    return out;
  }

  /// True when the observation returned by reset() already satisfies the goal.
  bool goal_reached_at_reset() const {
    require(goal_.has_value(), "goal_reached_at_reset without an active goal");
    return !stepped_ && evaluate_goal(obs_, *goal_, space());
  }

  std::vector<float> augment(const Observation& obs) const {
    require(goal_.has_value(), "augment without an active goal");
    const std::size_t w = space().encoding_width();
    std::vector<float> out(2 * w);
    space().encode(obs, std::span<float>(out).first(w));
    std::copy(goal_code_.begin(), goal_code_.end(), out.begin() + static_cast<std::ptrdiff_t>(w));
    return out;
  }

  const SpaceDescriptor& space() const { return inner_->observation_space(); }
  std::size_t augmented_width() const { return 2 * space().encoding_width(); }
  const std::optional<GoalSpec>& goal() const noexcept { return goal_; }
  const Observation& observation() const noexcept { return obs_; }
  Environment& inner() noexcept { return *inner_; }
  const Environment& inner() const noexcept { return *inner_; }

 private:
  std::unique_ptr<Environment> inner_;
  std::optional<GoalSpec> goal_;
  std::vector<float> goal_code_;
  Observation obs_;
  bool stepped_ = false;
};

}  // namespace gcrl
