#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "gcrl/error.hpp"
#include "gcrl/random.hpp"
#include "gcrl/space.hpp"

namespace gcrl {

struct StepOutcome {
  Observation next_obs;
  double external_reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

/// Base class for episodic environments with a discrete action set.
///
/// reset() and step() are non-virtual: they own the step counter, the RNG and
/// the end-of-episode contract, and delegate dynamics to do_reset()/do_step().
/// Truncation is raised only when the step that reaches the limit did not
/// terminate, so the two flags are never set together.
class Environment {
 public:
  virtual ~Environment() = default;

  Observation reset(std::uint64_t seed) {
    rng_.seed(seed);
    steps_ = 0;
    running_ = true;
    return do_reset(rng_);
  }

  StepOutcome step(std::size_t action) {
    require(running_, "Environment::step called after episode end (reset required)");
    require(action < action_count(), "Environment::step action out of range");
    StepOutcome out = do_step(action, rng_);
    ++steps_;
    out.truncated = !out.terminated && steps_ >= step_limit_;
    if (out.terminated || out.truncated) running_ = false;
    return out;
  }

  virtual const SpaceDescriptor& observation_space() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::string_view name() const = 0;

  /// The point that encodes the environment's own task, used to evaluate
  /// goal-conditioned agents on the external objective.
  virtual Observation external_goal() const = 0;

  /// True when the last transition completed the environment's own task.
  virtual bool task_solved() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

  std::size_t step_limit() const noexcept { return step_limit_; }
  std::size_t steps() const noexcept { return steps_; }
  bool running() const noexcept { return running_; }

 protected:
  explicit Environment(std::size_t step_limit) : step_limit_(step_limit) {
    require(step_limit >= 1, "step limit must be positive");
  }
  Environment(const Environment&) = default;
  Environment& operator=(const Environment&) = default;

  virtual Observation do_reset(Rng& rng) = 0;
  // Implementations fill next_obs, external_reward and terminated.
  virtual StepOutcome do_step(std::size_t action, Rng& rng) = 0;

 private:
  Rng rng_;
  std::size_t step_limit_;
  std::size_t steps_ = 0;
  bool running_ = false;
};

}  // namespace gcrl
