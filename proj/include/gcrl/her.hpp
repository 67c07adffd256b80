#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "gcrl/error.hpp"
#include "gcrl/goal.hpp"
#include "gcrl/random.hpp"
#include "gcrl/space.hpp"

namespace gcrl {

/// One learner-facing step. The reward is the internal goal reward in
/// goal-conditioned runs and the environment reward in baseline runs; there
/// is deliberately no slot that carries both.
struct Transition {
  Observation obs;
  std::optional<GoalSpec> goal;
  std::size_t action = 0;
  double reward = 0.0;
  Observation next_obs;
  bool terminal = false;
  bool env_terminated = false;
  std::uint64_t episode_id = 0;
  std::size_t step_in_episode = 0;
};

struct SampledTransition {
  Transition transition;
  bool relabeled = false;
  // step whose next_obs became the relabeled goal (>= own step)
  std::size_t goal_source_step = 0;
};

/// Ring buffer of whole episodes with "future" hindsight relabeling applied
/// at sampling time.
///
/// Each drawn transition is relabeled with probability `relabel_probability`
/// (4/5 gives four hindsight goals per unaltered use): the new goal is the
/// next observation of a uniformly drawn step j >= t of the same episode, and
/// reward/terminal are recomputed against it. Episodes are evicted whole.
class HindsightReplayBuffer {
 public:
  HindsightReplayBuffer(SpaceDescriptor space, std::size_t capacity, double relabel_probability = 0.8)
      : space_(std::move(space)), capacity_(capacity), relabel_probability_(relabel_probability) {
    require(capacity > 0, "replay capacity must be positive");
    require(relabel_probability >= 0 && relabel_probability <= 1, "relabel probability must lie in [0,1]");
    const std::size_t w = space_.raw_width();
    obs_.assign(capacity * w, 0.0);
    next_obs_.assign(capacity * w, 0.0);
    goal_.assign(capacity * w, 0.0);
    tolerance_.assign(capacity, 0.0);
    action_.assign(capacity, 0);
    reward_.assign(capacity, 0.0);
    flags_.assign(capacity, 0);
    episode_id_.assign(capacity, 0);
    step_.assign(capacity, 0);
    length_.assign(capacity, 0);
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t episode_count() const noexcept { return episodes_.size(); }
  double relabel_probability() const noexcept { return relabel_probability_; }
  const SpaceDescriptor& space() const noexcept { return space_; }

  struct EpisodeSpan {
    std::uint64_t id = 0;
    std::size_t start = 0;  // slot of step 0
    std::size_t length = 0;
  };
  const std::deque<EpisodeSpan>& episodes() const noexcept { return episodes_; }

  void append_episode(std::span<const Transition> episode) {
    require(!episode.empty(), "append_episode: empty episode");
    require(episode.size() <= capacity_, "append_episode: episode longer than buffer capacity");
    const bool has_goal = episode.front().goal.has_value();
    const std::uint64_t id = episode.front().episode_id;
    require(episodes_.empty() || id > episodes_.back().id, "append_episode: episode ids must increase");
    for (std::size_t i = 0; i < episode.size(); ++i) {
      require(episode[i].step_in_episode == i, "append_episode: inconsistent step numbering");
      require(episode[i].episode_id == id, "append_episode: mixed episode ids");
      require(episode[i].goal.has_value() == has_goal, "append_episode: mixed goal/no-goal transitions");
    }
    while (size_ + episode.size() > capacity_) {
      size_ -= episodes_.front().length;
      episodes_.pop_front();
    }
    const std::size_t start = tail_;
    for (std::size_t i = 0; i < episode.size(); ++i) {
      const Transition& t = episode[i];
      const std::size_t slot = (start + i) % capacity_;
      space_.store_raw(t.obs, raw(obs_, slot));
      space_.store_raw(t.next_obs, raw(next_obs_, slot));
      if (t.goal) {
        space_.store_raw(t.goal->point, raw(goal_, slot));
        tolerance_[slot] = t.goal->tolerance;
      }
      action_[slot] = t.action;
      reward_[slot] = t.reward;
      flags_[slot] = static_cast<std::uint8_t>((t.terminal ? kTerminal : 0) | (t.env_terminated ? kEnvTerminal : 0) |
                                               (t.goal ? kHasGoal : 0));
      episode_id_[slot] = id;
      step_[slot] = i;
      length_[slot] = episode.size();
    }
    episodes_.push_back({id, start, episode.size()});
    size_ += episode.size();
    tail_ = (start + episode.size()) % capacity_;
  }

  /// Draws `batch_size` transitions uniformly (with replacement) and applies
  /// hindsight relabeling to goal-carrying ones.
  std::vector<SampledTransition> sample_batch(std::size_t batch_size, Rng& rng) const {
    require(size_ > 0, "sample_batch on an empty buffer");
    std::vector<SampledTransition> batch;
    batch.reserve(batch_size);
    const std::size_t head = episodes_.front().start;
    for (std::size_t n = 0; n < batch_size; ++n) {
      const std::size_t slot = (head + uniform_index(rng, size_)) % capacity_;
      batch.push_back(draw(slot, rng));
    }
    return batch;
  }

  /// The stored (unaltered) transition at a logical position [0, size).
  Transition stored(std::size_t position) const {
    require(position < size_, "stored: position out of range");
    return load((episodes_.front().start + position) % capacity_);
  }

 private:
  static constexpr std::uint8_t kTerminal = 1;
  static constexpr std::uint8_t kEnvTerminal = 2;
  static constexpr std::uint8_t kHasGoal = 4;

  std::span<double> raw(std::vector<double>& v, std::size_t slot) {
    const std::size_t w = space_.raw_width();
    return std::span<double>(v).subspan(slot * w, w);
  }
  std::span<const double> raw(const std::vector<double>& v, std::size_t slot) const {
    const std::size_t w = space_.raw_width();
    return std::span<const double>(v).subspan(slot * w, w);
  }

  Transition load(std::size_t slot) const {
    Transition t;
    t.obs = space_.load_raw(raw(obs_, slot));
    t.next_obs = space_.load_raw(raw(next_obs_, slot));
    if (flags_[slot] & kHasGoal) t.goal = GoalSpec{space_.load_raw(raw(goal_, slot)), tolerance_[slot]};
    t.action = action_[slot];
    t.reward = reward_[slot];
    t.terminal = flags_[slot] & kTerminal;
    t.env_terminated = flags_[slot] & kEnvTerminal;
    t.episode_id = episode_id_[slot];
    t.step_in_episode = step_[slot];
    return t;
  }

  SampledTransition draw(std::size_t slot, Rng& rng) const {
    SampledTransition s{load(slot), false, 0};
    if (!s.transition.goal || !(uniform01(rng) < relabel_probability_)) return s;
    const std::size_t t = step_[slot];
    const std::size_t len = length_[slot];
    const std::size_t episode_start = (slot + capacity_ - t) % capacity_;
    const std::size_t j = t + uniform_index(rng, len - t);
    const std::size_t source = (episode_start + j) % capacity_;
    s.transition.goal->point = space_.load_raw(raw(next_obs_, source));
    const bool success = evaluate_goal(s.transition.next_obs, *s.transition.goal, space_);
    s.transition.reward = success ? 1.0 : 0.0;
    s.transition.terminal = success || s.transition.env_terminated;
    s.relabeled = true;
    s.goal_source_step = j;
    return s;
  }

  SpaceDescriptor space_;
  std::size_t capacity_;
  double relabel_probability_;

  std::vector<double> obs_;
  std::vector<double> next_obs_;
  std::vector<double> goal_;
  std::vector<double> tolerance_;
  std::vector<std::size_t> action_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint64_t> episode_id_;
  std::vector<std::size_t> step_;
  std::vector<std::size_t> length_;

  std::deque<EpisodeSpan> episodes_;
  std::size_t size_ = 0;
  std::size_t tail_ = 0;
};

}  // namespace gcrl
