#include "fbee/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fbee/fb.hpp"
#include "fbee/oracle.hpp"

namespace fbee {

void Task::validate(int n_states) const {
  if (reward.size() != n_states) throw std::invalid_argument("task " + name + ": reward has the wrong length");
  if ((reward.array() < 0.0).any() || (reward.array() > 1.0).any()) {
    throw std::invalid_argument("task " + name + ": rewards must lie in [0, 1]");
  }
  if (kind == TaskKind::Goal && (!goal_state || *goal_state < 0 || *goal_state >= n_states)) {
    throw std::invalid_argument("task " + name + ": goal task needs a valid goal state");
  }
}

Task goal_task(std::string name, StateId goal, int n_states) {
  if (goal < 0 || goal >= n_states) throw std::out_of_range("goal_task: goal out of range");
  Task task{std::move(name), TaskKind::Goal, Eigen::VectorXd::Zero(n_states), goal};
  task.reward(goal) = 1.0;
  return task;
}

namespace {

std::vector<Task> four_room_suite(const FourRoomLayout& layout) {
  const int side = layout.side();
  const int n = layout.n_cells();
  std::vector<Task> tasks;
  for (int room = 0; room < 4; ++room) {
    const auto cells = layout.room_cells(room);
    int r0 = side, r1 = -1, c0 = side, c1 = -1;
    for (StateId s : cells) {
      r0 = std::min(r0, layout.row_of(s));
      r1 = std::max(r1, layout.row_of(s));
      c0 = std::min(c0, layout.col_of(s));
      c1 = std::max(c1, layout.col_of(s));
    }
    const bool top = room < 2;
    const bool left = room % 2 == 0;
    const int outer_r = top ? r0 : r1, inner_r = top ? r1 : r0;
    const int outer_c = left ? c0 : c1, inner_c = left ? c1 : c0;
    const std::pair<const char*, StateId> candidates[] = {
        {"outer", layout.cell(outer_r, outer_c)},
        {"center", layout.cell((r0 + r1) / 2, (c0 + c1) / 2)},
        {"inner", layout.cell(inner_r, inner_c)},
        {"side", layout.cell(outer_r, inner_c)},
        {"side2", layout.cell(inner_r, outer_c)},
    };
    std::vector<StateId> used;
    for (const auto& [label, cell] : candidates) {
      if (used.size() == 3) break;
      if (std::find(used.begin(), used.end(), cell) != used.end()) continue;
      used.push_back(cell);
      tasks.push_back(goal_task("goal_room" + std::to_string(room) + "_" + label, cell, n));
    }
  }
  const double span = side - 1;
  Task distance{"dense_distance", TaskKind::Reward, Eigen::VectorXd::Zero(n), std::nullopt};
  Task corners{"dense_corners", TaskKind::Reward, Eigen::VectorXd::Zero(n), std::nullopt};
  for (StateId s : layout.free_cells()) {
    const int r = layout.row_of(s), c = layout.col_of(s);
    distance.reward(s) = 1.0 - ((side - 1 - r) + (side - 1 - c)) / (2.0 * span);
    const int to_corner = std::min(r, side - 1 - r) + std::min(c, side - 1 - c);
    corners.reward(s) = std::max(0.0, 1.0 - to_corner / span);
  }
  tasks.push_back(std::move(distance));
  tasks.push_back(std::move(corners));
  return tasks;
}

}  // namespace

std::vector<Task> task_suite(const Environment& env) {
  const int n = env.mdp.n_states();
  switch (env.params.kind) {
    case EnvKind::FourRoom:
      if (!env.layout) throw std::invalid_argument("task_suite: four-room environment without a layout");
      return four_room_suite(*env.layout);
    case EnvKind::Chain:
      return {goal_task("goal_right_end", n - 1, n), goal_task("goal_left_end", 0, n)};
    case EnvKind::Random: {
      auto rng = derive_rng(env.params.seed, "tasks");
      std::uniform_real_distribution<double> unit;
      std::vector<Task> tasks;
      for (int t = 0; t < 5; ++t) {
        Task task{"random_reward_" + std::to_string(t), TaskKind::Reward, Eigen::VectorXd(n), std::nullopt};
        for (int s = 0; s < n; ++s) task.reward(s) = unit(rng);
        tasks.push_back(std::move(task));
      }
      return tasks;
    }
  }
  throw std::invalid_argument("task_suite: unknown environment kind");
}

ZInference infer_z_reward(const Eigen::VectorXd& reward, std::span<const StateId> states,
                          const BackwardModel& backward) {
  if (states.empty()) throw std::invalid_argument("infer_z_reward: no samples");
  std::vector<StateId> rewarded;
  std::vector<double> weights;
  for (StateId s : states) {
    if (s < 0 || s >= reward.size()) throw std::out_of_range("infer_z_reward: state out of range");
    if (reward(s) != 0.0) {
      rewarded.push_back(s);
      weights.push_back(reward(s));
    }
  }
  ZInference out;
  out.raw = Eigen::VectorXd::Zero(backward.embedding_dim());
  if (!rewarded.empty()) {
    const Eigen::MatrixXd embeddings = backward.backward(rewarded);
    for (std::size_t i = 0; i < rewarded.size(); ++i) out.raw += weights[i] * embeddings.col(static_cast<Eigen::Index>(i));
    out.raw /= static_cast<double>(states.size());
  }
  out.zero_reward = out.raw.squaredNorm() == 0.0;
  out.z = out.zero_reward ? out.raw : rescale_to_sphere(out.raw);
  return out;
}

ZInference infer_z_reward(const Task& task, const ReplayBuffer& buffer, const BackwardModel& backward,
                          int n_samples, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("infer_z_reward: empty buffer");
  if (n_samples < 1) throw std::invalid_argument("infer_z_reward: n_samples must be >= 1");
  std::vector<StateId> states;
  states.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) states.push_back(buffer.sample(rng).next_state);
  return infer_z_reward(task.reward, states, backward);
}

ZInference infer_z_goal(const Task& task, const BackwardModel& backward) {
  if (task.kind != TaskKind::Goal || !task.goal_state) throw std::invalid_argument("infer_z_goal: not a goal task");
  const StateId states[] = {*task.goal_state};
  ZInference out;
  out.raw = backward.backward(states).col(0);
  out.zero_reward = out.raw.squaredNorm() == 0.0;
  out.z = rescale_to_sphere(out.raw);
  return out;
}

double OptimalReturnCache::get(const Environment& env, const Task& task) {
  if (auto it = values_.find(task.name); it != values_.end()) return it->second;
  const int A = env.mdp.n_actions();
  const Eigen::VectorXd reward = lift_state_reward(std::span<const double>(task.reward.data(), task.reward.size()), A);
  const auto vi = value_iteration(env.mdp, reward);
  const auto policy = TabularPolicy::deterministic(vi.policy, A);
  const double value = exact_policy_return(env.mdp, env.episode, policy, reward).mean;
  values_.emplace(task.name, value);
  return value;
}

PolicyReturns simulate_policy(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                              std::span<const ActionId> policy, const Eigen::VectorXd& state_reward,
                              int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("simulate_policy: n_episodes must be >= 1");
  const auto start = start_distribution(mdp, spec);
  const double gamma = mdp.gamma();
  std::vector<double> returns;
  double undiscounted_total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    StateId s = sample_index(start, rng);
    double ret = 0.0, discount = 1.0;
    for (int t = 0; t < spec.horizon; ++t) {
      s = mdp.sample_next(s, policy[s], rng);
      ret += discount * state_reward(s);
      undiscounted_total += state_reward(s);
      discount *= gamma;
    }
    returns.push_back(ret);
  }
  PolicyReturns out;
  for (double r : returns) out.mean += r;
  out.mean /= n_episodes;
  if (n_episodes > 1) {
    double ss = 0.0;
    for (double r : returns) ss += (r - out.mean) * (r - out.mean);
    out.std = std::sqrt(ss / (n_episodes - 1));
  }
  out.mean_undiscounted = undiscounted_total / n_episodes;
  return out;
}

ZeroShotResult evaluate_zero_shot(const Environment& env, const ForwardModel& forward,
                                  const BackwardModel& backward, const ReplayBuffer& buffer,
                                  const Task& task, const ZeroShotOptions& options, Rng& rng,
                                  OptimalReturnCache* cache) {
  const int n = env.mdp.n_states();
  task.validate(n);
  ZInference inference;
  if (task.kind == TaskKind::Goal) {
    inference = infer_z_goal(task, backward);
  } else if (buffer.empty()) {
    // Nothing to relabel yet: act with the zero embedding.
    inference.raw = inference.z = Eigen::VectorXd::Zero(backward.embedding_dim());
    inference.zero_reward = true;
  } else {
    inference = infer_z_reward(task, buffer, backward, options.n_reward_samples, rng);
  }
  const auto policy = greedy_policy(forward, n, inference.z);
  const auto returns = simulate_policy(env.mdp, env.episode, policy, task.reward, options.n_episodes, rng);

  ZeroShotResult out;
  out.task = task.name;
  out.z = inference.z;
  out.zero_reward = inference.zero_reward;
  out.mean_return = returns.mean;
  out.std_return = returns.std;
  out.mean_undiscounted = returns.mean_undiscounted;
  OptimalReturnCache local;
  out.optimal_return = (cache ? *cache : local).get(env, task);
  if (out.optimal_return == 0.0) {
    out.ratio = 1.0;
    out.ratio_by_convention = true;
  } else {
    out.ratio = out.mean_return / out.optimal_return;
  }
  return out;
}

}  // namespace fbee
