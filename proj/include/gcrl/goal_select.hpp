#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gcrl/error.hpp"
#include "gcrl/goal.hpp"
#include "gcrl/random.hpp"
#include "gcrl/space.hpp"

namespace gcrl {

struct CellStats {
  std::uint64_t visits = 0;
  std::uint64_t targeted = 0;
  std::uint64_t succeeded = 0;
};

/// Visitation and goal statistics over a grid laid on the observation space:
/// one cell per state for discrete spaces, a uniform box grid otherwise.
class GridStats {
 public:
  GridStats() = default;

  GridStats(SpaceDescriptor space, std::vector<std::size_t> bins_per_dim = {})
      : space_(std::move(space)), bins_(std::move(bins_per_dim)) {
    if (space_.is_discrete()) {
      bins_ = {space_.n_states()};
    } else {
      require(bins_.size() == space_.dimension(), "GridStats: need one bin count per box dimension");
    }
    std::size_t cells = 1;
    for (std::size_t b : bins_) {
      require(b >= 1, "GridStats: bin counts must be positive");
      cells *= b;
    }
    cells_.assign(cells, CellStats{});
  }

  const SpaceDescriptor& space() const noexcept { return space_; }
  const std::vector<std::size_t>& bins() const noexcept { return bins_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  std::uint64_t total_steps() const noexcept { return total_steps_; }
  const CellStats& cell(std::size_t c) const { return cells_.at(c); }

  std::size_t cell_of(const Observation& obs) const {
    require(space_.same_kind(obs), "GridStats::cell_of: observation/space mismatch");
    if (space_.is_discrete()) {
      require(obs.index() < cells_.size(), "GridStats::cell_of: index out of range");
      return obs.index();
    }
    std::size_t cell = 0;
    for (std::size_t d = 0; d < bins_.size(); ++d) {
      const double u = space_.normalize(d, obs.values()[d]);
      auto b = static_cast<long long>(std::floor(u * static_cast<double>(bins_[d])));
      b = std::clamp<long long>(b, 0, static_cast<long long>(bins_[d]) - 1);
      cell = cell * bins_[d] + static_cast<std::size_t>(b);
    }
    return cell;
  }

  void record_step(const Observation& obs) {
    ++cells_[cell_of(obs)].visits;
    ++total_steps_;
  }

  void record_goal_outcome(const Observation& goal, bool success) {
    CellStats& c = cells_[cell_of(goal)];
    ++c.targeted;
    if (success) ++c.succeeded;
  }

  /// Share of all recorded steps that landed in the cell (0 before any step).
  double visit_fraction(std::size_t c) const {
    if (total_steps_ == 0) return 0.0;
    return static_cast<double>(cells_.at(c).visits) / static_cast<double>(total_steps_);
  }

  /// Success rate of goals targeted in the cell; empty when never targeted.
  std::optional<double> success_rate(std::size_t c) const {
    const CellStats& s = cells_.at(c);
    if (s.targeted == 0) return std::nullopt;
    return static_cast<double>(s.succeeded) / static_cast<double>(s.targeted);
  }

  Observation sample_in_cell(std::size_t c, Rng& rng) const {
    require(c < cells_.size(), "sample_in_cell: cell out of range");
    if (space_.is_discrete()) return Observation::discrete(c);
    std::vector<double> point(bins_.size());
    for (std::size_t d = bins_.size(); d-- > 0;) {
      const std::size_t b = c % bins_[d];
      c /= bins_[d];
      const double width = (space_.high()[d] - space_.low()[d]) / static_cast<double>(bins_[d]);
      const double lo = space_.low()[d] + width * static_cast<double>(b);
      const double hi = b + 1 == bins_[d] ? space_.high()[d] : lo + width;
      point[d] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    return Observation::box(std::move(point));
  }

 private:
  SpaceDescriptor space_;
  std::vector<std::size_t> bins_;
  std::vector<CellStats> cells_;
  std::uint64_t total_steps_ = 0;
};

enum class Strategy { uniform, novelty, intermediate };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::uniform: return "uniform";
    case Strategy::novelty: return "novelty";
    case Strategy::intermediate: return "intermediate";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "uniform") return Strategy::uniform;
  if (name == "novelty") return Strategy::novelty;
  if (name == "intermediate") return Strategy::intermediate;
  throw ContractViolation("unknown goal selection strategy '" + name + "'");
}

struct SelectionParams {
  double epsilon = 0.01;
  double exponent = 2.0;
  double target_success = 0.9;
  double uniform_mix = 0.1;

  void validate() const {
    require(epsilon > 0, "selection epsilon must be positive");
    require(target_success >= 0 && target_success <= 1, "target success rate must lie in [0,1]");
    require(uniform_mix >= 0 && uniform_mix <= 1, "uniform mix must lie in [0,1]");
  }
};

/// Relative weight of a cell by visit share: 1 / (p_v + eps)^n.
inline double novelty_weight(double visit_fraction, const SelectionParams& p) {
  return 1.0 / std::pow(visit_fraction + p.epsilon, p.exponent);
}

/// Relative weight of a cell by success rate: 1 / (|p_s - p_target| + eps)^n.
inline double intermediate_weight(double success_rate, const SelectionParams& p) {
  return 1.0 / std::pow(std::abs(success_rate - p.target_success) + p.epsilon, p.exponent);
}

enum class GoalSource {
  uniform_mix,  // the uniform share mixed into every strategy
  uniform,      // the uniform strategy itself
  weighted,     // cell drawn by novelty / intermediate weight
  untargeted,   // intermediate: drawn among visited but never targeted cells
  fallback      // no statistics yet, uniform over the space
};

struct GoalChoice {
  GoalSpec goal;
  GoalSource source = GoalSource::uniform;
  std::optional<std::size_t> cell;
};

/// Draws an episode goal. The agent's current state is deliberately not an input.
inline GoalChoice select_goal(Strategy strategy, const GridStats& stats, const SelectionParams& params,
                              double tolerance, Rng& rng) {
  const SpaceDescriptor& space = stats.space();
  auto uniform_choice = [&](GoalSource source) {
    return GoalChoice{GoalSpec{space.sample_uniform(rng), tolerance}, source, std::nullopt};
  };
  auto from_cell = [&](std::size_t c, GoalSource source) {
    return GoalChoice{GoalSpec{stats.sample_in_cell(c, rng), tolerance}, source, c};
  };

  if (uniform01(rng) < params.uniform_mix) return uniform_choice(GoalSource::uniform_mix);

  switch (strategy) {
    case Strategy::uniform:
      return uniform_choice(GoalSource::uniform);

    case Strategy::novelty: {
      if (stats.total_steps() == 0) return uniform_choice(GoalSource::fallback);
      std::vector<double> weights(stats.cell_count());
      for (std::size_t c = 0; c < weights.size(); ++c)
        weights[c] = novelty_weight(stats.visit_fraction(c), params);
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      return from_cell(pick(rng), GoalSource::weighted);
    }

    case Strategy::intermediate: {
      std::vector<std::size_t> untargeted;
      std::vector<std::size_t> targeted;
      std::size_t visited = 0;
      for (std::size_t c = 0; c < stats.cell_count(); ++c) {
        const CellStats& s = stats.cell(c);
        if (s.visits > 0) ++visited;
        if (s.targeted > 0) targeted.push_back(c);
        else if (s.visits > 0) untargeted.push_back(c);
      }
      if (visited == 0 && targeted.empty()) return uniform_choice(GoalSource::fallback);
      const double untargeted_share =
          visited == 0 ? 0.0 : static_cast<double>(untargeted.size()) / static_cast<double>(visited);
      const bool take_untargeted = !untargeted.empty() && (targeted.empty() || uniform01(rng) < untargeted_share);
      if (take_untargeted) return from_cell(untargeted[uniform_index(rng, untargeted.size())], GoalSource::untargeted);
      if (targeted.empty()) return uniform_choice(GoalSource::fallback);
      std::vector<double> weights(targeted.size());
      for (std::size_t i = 0; i < targeted.size(); ++i)
        weights[i] = intermediate_weight(*stats.success_rate(targeted[i]), params);
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      return from_cell(targeted[pick(rng)], GoalSource::weighted);
    }
  }
  return uniform_choice(GoalSource::fallback);
}

}  // namespace gcrl
