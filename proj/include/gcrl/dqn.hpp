#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gcrl/error.hpp"
#include "gcrl/goal.hpp"
#include "gcrl/her.hpp"
#include "gcrl/mlp.hpp"
#include "gcrl/optim.hpp"
#include "gcrl/random.hpp"

namespace gcrl {

struct AgentHyperparams {
  double gamma = 0.95;
  double learning_rate = 0.001;
  std::size_t batch_size = 512;
  std::size_t train_freq = 512;         // env steps between training events
  std::size_t gradient_steps = 64;      // updates per training event
  std::size_t target_update_interval = 10000;
  std::size_t learning_starts = 100;
  double exploration_initial = 1.0;
  double exploration_final = 0.05;
  double exploration_fraction = 0.1;
  double max_grad_norm = 10.0;

  void validate() const {
    require(gamma > 0 && gamma < 1, "gamma must lie in (0,1)");
    require(learning_rate > 0, "learning rate must be positive");
    require(batch_size > 0 && train_freq > 0 && target_update_interval > 0, "batch, train_freq and target interval must be positive");
    require(exploration_fraction > 0 && exploration_fraction <= 1, "exploration fraction must lie in (0,1]");
  }
};

/// Linear decay from exploration_initial to exploration_final over the first
/// exploration_fraction of training, constant afterwards.
inline double exploration_epsilon(std::size_t step, std::size_t total_steps, const AgentHyperparams& hp) {
  const double horizon = hp.exploration_fraction * static_cast<double>(total_steps);
  const double progress = horizon <= 0 ? 1.0 : std::min(1.0, static_cast<double>(step) / horizon);
  if (progress >= 1.0) return hp.exploration_final;
  return hp.exploration_initial + progress * (hp.exploration_final - hp.exploration_initial);
}

/// Learner inputs for a sampled batch: rows are encoded (obs[, goal]) pairs.
struct TrainingBatch {
  QNetwork::Batch inputs;
  QNetwork::Batch next_inputs;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;

  std::size_t size() const noexcept { return actions.size(); }
};

inline TrainingBatch make_training_batch(std::span<const SampledTransition> samples, const SpaceDescriptor& space) {
  require(!samples.empty(), "make_training_batch: empty sample");
  const bool with_goal = samples.front().transition.goal.has_value();
  const std::size_t w = space.encoding_width() * (with_goal ? 2 : 1);
  const auto rows = static_cast<Eigen::Index>(samples.size());
  TrainingBatch b;
  b.inputs.setZero(rows, static_cast<Eigen::Index>(w));
  b.next_inputs.setZero(rows, static_cast<Eigen::Index>(w));
  b.actions.reserve(samples.size());
  b.rewards.reserve(samples.size());
  b.terminal.reserve(samples.size());
  const std::size_t ew = space.encoding_width();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Transition& t = samples[i].transition;
    require(t.goal.has_value() == with_goal, "make_training_batch: mixed goal/no-goal samples");
    std::span<float> row(b.inputs.row(static_cast<Eigen::Index>(i)).data(), w);
    std::span<float> next_row(b.next_inputs.row(static_cast<Eigen::Index>(i)).data(), w);
    space.encode(t.obs, row.first(ew));
    space.encode(t.next_obs, next_row.first(ew));
    if (with_goal) {
      space.encode(t.goal->point, row.subspan(ew));
      space.encode(t.goal->point, next_row.subspan(ew));
    }
    b.actions.push_back(t.action);
    b.rewards.push_back(t.reward);
    b.terminal.push_back(t.terminal ? 1 : 0);
  }
  return b;
}

struct TrainResult {
  double loss = 0.0;
  std::vector<double> targets;
  std::vector<double> element_losses;
  double grad_norm = 0.0;
};

/// Index of the largest value; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// Q-learning with an online and a lagged target network. The same code path
/// serves goal-conditioned runs (augmented input, internal reward) and the
/// external-reward baseline (plain input, environment reward).
class DqnAgent {
 public:
  DqnAgent(const NetworkShape& shape, AgentHyperparams hp, std::uint64_t init_seed)
      : hp_(hp), online_(shape, init_seed), target_(online_), optimizer_(online_.parameter_count(), hp.learning_rate) {
    hp_.validate();
  }

  const AgentHyperparams& hyperparams() const noexcept { return hp_; }
  QNetwork& online() noexcept { return online_; }
  const QNetwork& online() const noexcept { return online_; }
  QNetwork& target() noexcept { return target_; }
  const QNetwork& target() const noexcept { return target_; }
  const AdamState& optimizer() const noexcept { return optimizer_; }
  std::size_t action_count() const noexcept { return online_.output_width(); }
  std::size_t input_width() const noexcept { return online_.input_width(); }
  std::uint64_t env_steps() const noexcept { return env_steps_; }
  std::uint64_t updates() const noexcept { return updates_; }

  std::size_t greedy_action(std::span<const float> input) const {
    const std::vector<float> q = online_.predict_one(input);
    return argmax<float>(q);
  }

  std::vector<std::size_t> greedy_actions(const QNetwork::Batch& inputs) const {
    const QNetwork::Batch q = online_.predict(inputs);
    std::vector<std::size_t> actions(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index r = 0; r < q.rows(); ++r)
      actions[static_cast<std::size_t>(r)] = argmax<float>(std::span<const float>(q.row(r).data(), q.cols()));
    return actions;
  }

  /// Epsilon-greedy action. Always consumes one uniform draw, plus one
  /// action draw when exploring.
  std::size_t act(std::span<const float> input, double epsilon, Rng& rng) const {
    require(epsilon >= 0 && epsilon <= 1, "act: epsilon must lie in [0,1]");
    if (uniform01(rng) < epsilon) return uniform_index(rng, action_count());
    return greedy_action(input);
  }

  /// One TD update: y = r for terminal transitions, r + gamma * max_a Q_target(s', a) otherwise.
  TrainResult train_step(const TrainingBatch& batch) {
    const std::size_t n = batch.size();
    require(n > 0, "train_step: empty batch");
    require(static_cast<std::size_t>(batch.inputs.cols()) == input_width(), "train_step: input width mismatch");
    const QNetwork::Batch q = online_.forward(batch.inputs);
    const QNetwork::Batch q_next = target_.predict(batch.next_inputs);

    TrainResult r;
    r.targets.resize(n);
    std::vector<double> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      require(batch.actions[i] < action_count(), "train_step: action out of range");
      double y = batch.rewards[i];
      if (!batch.terminal[i]) y += hp_.gamma * static_cast<double>(q_next.row(row).maxCoeff());
      r.targets[i] = y;
      pred[i] = static_cast<double>(q(row, static_cast<Eigen::Index>(batch.actions[i])));
    }
    HuberResult h = huber_loss(pred, r.targets);
    if (!std::isfinite(h.loss)) throw TrainingDivergence("non-finite TD loss");
    r.loss = h.loss;
    r.element_losses.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(pred[i] - r.targets[i]);
      r.element_losses[i] = d <= 1.0 ? 0.5 * d * d : d - 0.5;
    }

    QNetwork::Batch loss_grad = QNetwork::Batch::Zero(q.rows(), q.cols());
    for (std::size_t i = 0; i < n; ++i)
      loss_grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(batch.actions[i])) = static_cast<float>(h.grad[i]);
    auto grad = online_.backward(loss_grad);
    r.grad_norm = clip_grad_norm<float>(grad, hp_.max_grad_norm);
    adam_step<float>(optimizer_, online_.parameters(), grad);
    ++updates_;
    return r;
  }

  void observe_env_step() noexcept { ++env_steps_; }

  /// Hard copy online -> target whenever the env step counter sits on a
  /// multiple of target_update_interval. Returns true when a copy happened.
  bool maybe_update_target() {
    if (env_steps_ == 0 || env_steps_ % hp_.target_update_interval != 0 || env_steps_ == last_sync_) return false;
    sync_target();
    return true;
  }

  void sync_target() {
    target_.copy_parameters_from(online_);
    last_sync_ = env_steps_;
  }

 private:
  AgentHyperparams hp_;
  QNetwork online_;
  QNetwork target_;
  AdamState optimizer_;
  std::uint64_t env_steps_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t last_sync_ = 0;
};

}  // namespace gcrl
