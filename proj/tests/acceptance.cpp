// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion in the selected group fails.
//
//   acceptance fast     criteria 5-8 (oracles, formulas, replay, numerics)
//   acceptance cliff    criteria 1-2 (cliff-small preset, 3 seeds)
//   acceptance frozen   criterion 3  (frozen-small preset, 3 seeds per mode)
//   acceptance pmc      criterion 4  (pmc-small preset, 4 seeds)
//   acceptance all
//
// Training runs write their metrics under ./acceptance_runs and the verdict
// lines also go to ./acceptance_results_<group>.txt.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "gcrl/harness.hpp"
#include "oracles.hpp"

using namespace gcrl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int g_failures = 0;
std::ofstream g_results;

void emit(const std::string& line) {
  std::cout << line << std::endl;
  if (g_results) g_results << line << std::endl;
}

void report(int criterion, const std::string& title, Verdict& v) {
  emit(std::string(v.pass ? "PASS" : "FAIL") + " C" + std::to_string(criterion) + ' ' + title + ':' + v.detail.str());
  if (!v.pass) ++g_failures;
}

fs::path preset(const std::string& name) { return fs::path(GCRL_SOURCE_DIR) / "configs" / (name + ".cfg"); }

RunResult train_seed(RunConfig config, std::uint64_t seed, const std::string& tag) {
  config.seed = seed;
  config.output_dir = (fs::path("acceptance_runs") / tag / ("seed-" + std::to_string(seed))).string();
  std::cerr << "training " << tag << " seed " << seed << " (" << config.total_steps << " steps)" << std::endl;
  RunResult run = run_training(config, [&](const EvalRecord& rec, const TrainingSummary& s) {
    std::cerr << "  step " << rec.env_steps << " ext " << rec.ext_reward_mean;
    if (rec.avg_goal_success) std::cerr << " goals " << *rec.avg_goal_success;
    std::cerr << " task_solved_episodes " << s.task_solved_episodes << std::endl;
  });
  emit_metrics(run, config.output_dir);
  return run;
}

std::string fmt(double x) {
  std::ostringstream o;
  o << x;
  return o.str();
}

// ---------------------------------------------------------------- cliff

void cliff_criteria() {
  const RunConfig config = load_config(preset("cliff-small"));
  const double optimum = -static_cast<double>(oracle::cliff_shortest_path(36, 47));
  const double reachable = static_cast<double>(oracle::cliff_reachable_states().size()) / 48.0;

  Verdict c1, c2;
  c1.detail << " optimum " << optimum << ';';
  c2.detail << " reachable fraction " << fmt(reachable) << ';';
  for (std::uint64_t seed : {1, 2, 3}) {
    const RunResult run = train_seed(config, seed, "cliff-small");
    const auto& recs = run.metrics.records;
    if (run.aborted || recs.empty()) {
      c1.require(false, "seed " + std::to_string(seed) + " did not finish");
      c2.require(false, "seed " + std::to_string(seed) + " did not finish");
      continue;
    }
    const std::size_t tail = (recs.size() + 4) / 5;
    bool held = true;
    for (std::size_t i = recs.size() - tail; i < recs.size(); ++i) held = held && recs[i].ext_reward_mean == optimum;
    c1.detail << " seed " << seed << " final " << recs.back().ext_reward_mean << " held " << (held ? "yes" : "no")
              << " over last " << tail << ';';
    c1.require(held, "seed " + std::to_string(seed) + " left the optimum in the final 20%");

    const double final_avg = recs.back().avg_goal_success.value_or(0.0);
    c2.detail << " seed " << seed << " avg_goal_success " << fmt(final_avg) << ';';
    c2.require(final_avg >= 0.75, "seed " + std::to_string(seed) + " below 0.75");
    c2.require(std::abs(final_avg - reachable) <= 0.05, "seed " + std::to_string(seed) + " not within 0.05 of 38/48");
  }
  report(1, "cliff walking reaches and holds the optimal return", c1);
  report(2, "cliff walking average goal success", c2);
}

// ---------------------------------------------------------------- frozen

// First evaluation step at which the cross-seed mean reward reaches the bar.
std::optional<std::uint64_t> first_crossing(const AggregateTable& agg, double bar) {
  for (std::size_t row = 0; row < agg.env_steps.size(); ++row)
    if (agg.mean[row][0] >= bar) return agg.env_steps[row];
  return std::nullopt;
}

void frozen_criteria() {
  const double bar = 0.4;
  Verdict v;
  const double optimum = oracle::frozen_lake_optimal_success(100);
  v.detail << " value iteration optimum " << fmt(optimum) << ';';
  v.require(std::abs(optimum - 0.7) <= 0.05, "oracle optimum outside 0.7 +/- 0.05");

  std::map<Mode, std::optional<std::uint64_t>> crossing;
  for (Mode mode : {Mode::baseline, Mode::goal_conditioned}) {
    RunConfig config = load_config(preset("frozen-small"));
    config.mode = mode;
    std::vector<MetricsTable> tables;
    for (std::uint64_t seed : {1, 2, 3}) {
      const RunResult run = train_seed(config, seed, std::string("frozen-small-") + to_string(mode));
      v.require(!run.aborted, std::string(to_string(mode)) + " seed " + std::to_string(seed) + " aborted");
      tables.push_back(run.metrics);
    }
    const AggregateTable agg = aggregate(tables);
    const std::size_t tail = (agg.env_steps.size() + 4) / 5;
    double late = 0;
    for (std::size_t r = agg.env_steps.size() - tail; r < agg.env_steps.size(); ++r) late += agg.mean[r][0] / tail;
    crossing[mode] = first_crossing(agg, bar);
    v.detail << ' ' << to_string(mode) << " first mean>=" << bar << " at "
             << (crossing[mode] ? std::to_string(*crossing[mode]) : std::string("never")) << ", final-20% mean "
             << fmt(late) << ';';
    v.require(crossing[mode].has_value(), std::string(to_string(mode)) + " never reached the bar");
  }
  if (crossing[Mode::baseline] && crossing[Mode::goal_conditioned]) {
    const double ratio =
        static_cast<double>(*crossing[Mode::goal_conditioned]) / static_cast<double>(*crossing[Mode::baseline]);
    v.detail << " convergence ratio " << fmt(ratio) << ';';
    v.require(ratio <= 4.0, "goal-conditioned convergence more than 4x slower");
  }
  report(3, "frozen lake baseline and goal-conditioned agents", v);
}

// ---------------------------------------------------------------- pmc

void pmc_criteria() {
  const RunConfig config = load_config(preset("pmc-small"));
  Verdict v;
  double easy_sum = 0;
  int seeds = 0;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const RunResult run = train_seed(config, seed, "pmc-small");
    ++seeds;
    const auto& labels = run.metrics.goal_labels;
    const std::string easy_label = goal_label(Observation::box({0.5, 0.0}));
    const auto it = std::find(labels.begin(), labels.end(), easy_label);
    v.require(it != labels.end(), "no evaluation column for the easy goal");
    v.require(!run.aborted && !run.metrics.records.empty(), "seed " + std::to_string(seed) + " did not finish");
    if (it == labels.end() || run.metrics.records.empty()) continue;
    const double easy = run.metrics.records.back().per_goal_success[static_cast<std::size_t>(it - labels.begin())];
    easy_sum += easy;
    const auto& s = run.summary;
    v.detail << " seed " << seed << " hard summit episodes " << s.task_solved_episodes << " (first at "
             << (s.first_task_solved_step ? std::to_string(*s.first_task_solved_step) : std::string("-"))
             << "), final easy goal success " << fmt(easy) << ';';
    v.require(s.task_solved_episodes >= 1, "seed " + std::to_string(seed) + " never reached the hard summit");
  }
  const double easy_mean = seeds ? easy_sum / seeds : 0.0;
  v.detail << " mean final easy goal success " << fmt(easy_mean) << ';';
  v.require(easy_mean >= 0.8, "easy goal success below 0.8");
  report(4, "pathological mountain car hard summit found, easy goal learned", v);
}

// ---------------------------------------------------------------- fast

void oracle_equivalences() {
  Verdict v;

  // frozen lake slip kernel, every non-terminal state and action
  double min_p = 1.0;
  const int n = 30000;
  for (std::size_t s = 0; s < 16; ++s) {
    if (FrozenLake::is_hole(s) || s == FrozenLake::kGoal) continue;
    for (std::size_t a = 0; a < 4; ++a) {
      const auto dirs = oracle::frozen_slip_directions(a);
      FrozenLake env;
      env.reset(1000 * s + a);
      std::vector<double> counts(3, 0.0);
      bool in_set = true;
      for (int i = 0; i < n; ++i) {
        if (!env.running()) env.reset(1000 * s + a + 7919 * static_cast<std::uint64_t>(i));
        env.set_state(s);
        env.step(a);
        const auto d = std::find(dirs.begin(), dirs.end(), env.last_direction());
        if (d == dirs.end()) {
          in_set = false;
          break;
        }
        counts[static_cast<std::size_t>(d - dirs.begin())] += 1;
      }
      v.require(in_set, "slip outside the three directions");
      if (in_set) min_p = std::min(min_p, check::chi_square_p(counts, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
    }
  }
  v.detail << " frozen kernel min p " << fmt(min_p) << ';';
  v.require(min_p > 0.001, "slip kernel chi-square p <= 0.001");

  // cliff reachability explored through the environment
  std::set<std::size_t> seen = {36};
  std::deque<std::size_t> frontier = {36};
  CliffWalking cliff;
  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop_front();
    if (s == 47) continue;
    for (std::size_t a = 0; a < 4; ++a) {
      cliff.reset(0);
      cliff.set_state(s);
      const std::size_t next = cliff.step(a).next_obs.index();
      if (seen.insert(next).second) frontier.push_back(next);
    }
  }
  v.detail << " cliff reachable " << seen.size() << ';';
  v.require(seen == oracle::cliff_reachable_states() && seen.size() == 38, "cliff reachability differs from BFS oracle");

  // untilted mountain car against the canonical update
  MountainCarParams p;
  p.tilt = 0.0;
  p.x_min = -1.2;
  Rng rng(3);
  double worst = 0;
  for (int episode = 0; episode < 200; ++episode) {
    double x = std::uniform_real_distribution<double>(-1.2, 0.6)(rng);
    double vel = std::uniform_real_distribution<double>(-0.07, 0.07)(rng);
    double cx = x, cv = vel;
    for (int t = 0; t < 200; ++t) {
      const std::size_t a = uniform_index(rng, 3);
      PathologicalMountainCar::integrate(p, x, vel, a);
      oracle::canonical_mountain_car_step(cx, cv, a);
      worst = std::max({worst, std::abs(x - cx), std::abs(vel - cv)});
    }
  }
  v.detail << " mountain car max deviation " << worst << ';';
  v.require(worst <= 1e-12, "zero-tilt dynamics deviate from canonical");

  // DQN on the two-state MDP
  const double gamma = 0.95;
  const auto q = oracle::toy_mdp_optimal_q(gamma);
  AgentHyperparams hp;
  hp.gamma = gamma;
  hp.target_update_interval = 25;
  DqnAgent agent({Architecture::simple3x256, 2, 2, 32}, hp, 3);
  std::vector<std::array<double, 5>> rows;
  for (int rep = 0; rep < 8; ++rep) {
    rows.push_back({0, 0, 0.0, 0, 0});
    rows.push_back({0, 1, 0.5, 1, 0});
    rows.push_back({1, 0, 0.0, 0, 0});
    rows.push_back({1, 1, 1.0, 1, 1});
  }
  const TrainingBatch batch = check::one_hot_batch(rows, 2);
  for (int step = 0; step < 6000; ++step) {
    agent.train_step(batch);
    agent.observe_env_step();
    agent.maybe_update_target();
  }
  double q_err = 0;
  for (std::size_t s = 0; s < 2; ++s) {
    std::vector<float> in(2, 0.0f);
    in[s] = 1.0f;
    const auto pred = agent.online().predict_one(in);
    for (std::size_t a = 0; a < 2; ++a) q_err = std::max(q_err, std::abs(pred[a] - q[s][a]));
  }
  v.detail << " toy MDP max |Q - Q*| " << q_err << ';';
  v.require(q_err <= 1e-2, "DQN does not match value iteration");

  report(5, "oracle equivalences", v);
}

void formula_suites() {
  Verdict v;
  double worst = 0;
  for (const check::WeightCase& c : check::kWeightTable) {
    SelectionParams p;
    p.epsilon = c.epsilon;
    p.exponent = c.exponent;
    p.target_success = c.target;
    const double w = c.novelty ? novelty_weight(c.rate, p) : intermediate_weight(c.rate, p);
    worst = std::max(worst, std::abs(w / c.expected - 1.0));
  }
  v.detail << " weight table max relative error " << worst << ';';
  v.require(worst <= 1e-9, "weight table mismatch");

  const int draws = 100000;
  const SelectionParams defaults;

  {
    GridStats stats(SpaceDescriptor::discrete(3));
    stats.record_step(Observation::discrete(1));
    stats.record_step(Observation::discrete(2));
    const std::vector<double> w = {novelty_weight(0, defaults), novelty_weight(0.5, defaults),
                                   novelty_weight(0.5, defaults)};
    const double total = w[0] + w[1] + w[2];
    std::vector<double> probs;
    for (double x : w) probs.push_back(defaults.uniform_mix / 3 + (1 - defaults.uniform_mix) * x / total);
    Rng rng(17);
    std::vector<double> counts(3, 0);
    for (int i = 0; i < draws; ++i)
      counts[select_goal(Strategy::novelty, stats, defaults, 0.1, rng).goal.point.index()] += 1;
    const double pv = check::chi_square_p(counts, probs);
    v.detail << " novelty p " << fmt(pv) << ", floor cell share " << fmt(counts[1] / draws) << ';';
    v.require(pv > 0.001, "novelty frequencies");
    v.require(counts[1] / draws >= defaults.uniform_mix / 3 * 0.95, "uniform mix floor");
  }
  {
    GridStats stats(SpaceDescriptor::discrete(5));
    const int visits[] = {0, 3, 1, 4, 2};
    for (std::size_t s = 0; s < 5; ++s)
      for (int i = 0; i < visits[s]; ++i) stats.record_step(Observation::discrete(s));
    for (int i = 0; i < 4; ++i) stats.record_goal_outcome(Observation::discrete(3), i < 3);
    for (int i = 0; i < 2; ++i) stats.record_goal_outcome(Observation::discrete(4), false);
    SelectionParams p;
    p.target_success = 0.75;
    const double w3 = intermediate_weight(0.75, p), w4 = intermediate_weight(0.0, p);
    const double share = 0.5;  // two of the four visited cells were never targeted
    const std::vector<double> probs = {0.1 / 5, 0.1 / 5 + 0.9 * share / 2, 0.1 / 5 + 0.9 * share / 2,
                                       0.1 / 5 + 0.9 * (1 - share) * w3 / (w3 + w4),
                                       0.1 / 5 + 0.9 * (1 - share) * w4 / (w3 + w4)};
    Rng rng(23);
    std::vector<double> counts(5, 0);
    for (int i = 0; i < draws; ++i)
      counts[select_goal(Strategy::intermediate, stats, p, 0.1, rng).goal.point.index()] += 1;
    const double pv = check::chi_square_p(counts, probs);
    v.detail << " intermediate p " << fmt(pv) << ';';
    v.require(pv > 0.001, "intermediate frequencies");
  }
  report(6, "goal selection formulas and sampling", v);
}

void her_suite() {
  Verdict v;
  {
    HindsightReplayBuffer buf(SpaceDescriptor::discrete(7), 10000);
    Rng gen(1);
    for (std::uint64_t id = 0; id < 20; ++id)
      buf.append_episode(check::random_episode(SpaceDescriptor::discrete(7), id, 50, gen, false));
    Rng rng(99);
    std::size_t relabeled = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n / 500; ++i)
      for (const auto& s : buf.sample_batch(500, rng)) relabeled += s.relabeled;
    const double frac = relabeled / double(n);
    v.detail << " relabeled fraction " << fmt(frac) << ';';
    v.require(std::abs(frac - 0.8) <= 0.01, "relabeled fraction outside 0.8 +/- 0.01");
  }
  {
    const SpaceDescriptor space = SpaceDescriptor::discrete(12);
    Rng gen(7);
    HindsightReplayBuffer buf(space, 5000);
    std::map<std::uint64_t, std::vector<Transition>> episodes;
    std::size_t checked = 0, violations = 0;
    for (std::uint64_t id = 0; id < 1000; ++id) {
      const std::size_t len = 1 + uniform_index(gen, 40);
      auto ep = check::random_episode(space, id, len, gen, uniform01(gen) < 0.3);
      episodes[id] = ep;
      buf.append_episode(ep);
      if (id % 10 != 9) continue;
      for (const SampledTransition& s : buf.sample_batch(256, gen)) {
        const Transition& t = s.transition;
        const auto& src = episodes.at(t.episode_id);
        const bool success = evaluate_goal(t.next_obs, *t.goal, space);
        ++checked;
        bool ok = t.reward == (success ? 1.0 : 0.0) && t.terminal == (success || t.env_terminated);
        if (s.relabeled)
          ok = ok && s.goal_source_step >= t.step_in_episode && s.goal_source_step < src.size() &&
               t.goal->point == src[s.goal_source_step].next_obs;
        else
          ok = ok && t.goal->point == src[t.step_in_episode].goal->point;
        violations += !ok;
      }
    }
    v.detail << " future-only and consistency checked on " << checked << " samples, violations " << violations
             << ';';
    v.require(violations == 0, "relabel violations");
  }
  report(7, "hindsight replay", v);
}

void numerics() {
  Verdict v;
  for (auto arch : {Architecture::simple3x256, Architecture::residual4blocks}) {
    check::NetD net({arch, 8, 4}, 3);
    const check::FdReport rep = check::finite_difference_check(net, 100, 11);
    v.detail << ' ' << to_string(arch) << " worst relative FD error " << rep.worst << " over " << rep.probes
             << " probes;";
    v.require(rep.worst <= 1e-4 && rep.probes == 100, std::string(to_string(arch)) + " gradient check");
  }

  RunConfig config = load_config(preset("cliff-small"));
  config.total_steps = 12000;
  config.eval_interval = 3000;
  std::vector<std::string> csv;
  for (int rep = 0; rep < 2; ++rep) {
    const RunResult run = train_seed(config, 5, "determinism-" + std::to_string(rep));
    csv.push_back(read_text_file(fs::path(run.config.output_dir) / "metrics.csv"));
  }
  v.detail << " repeated run CSV " << csv[0].size() << " bytes, identical " << (csv[0] == csv[1] ? "yes" : "no") << ';';
  v.require(!csv[0].empty() && csv[0] == csv[1], "repeated run differs");
  report(8, "gradient checks and determinism", v);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string group = argc > 1 ? argv[1] : "fast";
  const std::map<std::string, std::vector<std::function<void()>>> groups = {
      {"fast", {oracle_equivalences, formula_suites, her_suite, numerics}},
      {"cliff", {cliff_criteria}},
      {"frozen", {frozen_criteria}},
      {"pmc", {pmc_criteria}},
      {"all",
       {cliff_criteria, frozen_criteria, pmc_criteria, oracle_equivalences, formula_suites, her_suite, numerics}},
  };
  const auto it = groups.find(group);
  if (it == groups.end()) {
    std::cerr << "usage: acceptance [fast|cliff|frozen|pmc|all]\n";
    return 64;
  }
  g_results.open("acceptance_results_" + group + ".txt");
  for (const auto& run : it->second) {
    try {
      run();
    } catch (const std::exception& e) {
      emit("FAIL " + group + ": " + e.what());
      ++g_failures;
    }
  }
  return g_failures == 0 ? 0 : 1;
}
