#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbee/environments.hpp"
#include "fbee/models.hpp"
#include "fbee/replay_buffer.hpp"

namespace fbee {

enum class TaskKind { Reward, Goal };

/// Downstream task with a state reward in [0, 1]; r(s, a) = reward(s).
struct Task {
  std::string name;
  TaskKind kind = TaskKind::Reward;
  Eigen::VectorXd reward;
  std::optional<StateId> goal_state;

  void validate(int n_states) const;
};

/// Indicator reward of a single goal state.
Task goal_task(std::string name, StateId goal, int n_states);

/// Four-room: 3 goals per room plus a distance-shaped and a corner-seeking
/// dense task. Chain: right-end and left-end goals. Random MDP: 5 uniform
/// rewards seeded from the environment seed.
std::vector<Task> task_suite(const Environment& env);

struct ZInference {
  Eigen::VectorXd z;      // rescaled to norm sqrt(d); zero when the reward vanished
  Eigen::VectorXd raw;    // sample average before rescaling
  bool zero_reward = false;
};

/// z_R = mean_i r(s_i) B(s_i) over the given states, then rescaled.
ZInference infer_z_reward(const Eigen::VectorXd& reward, std::span<const StateId> states,
                          const BackwardModel& backward);

/// Same with n_samples next states drawn uniformly from the buffer.
ZInference infer_z_reward(const Task& task, const ReplayBuffer& buffer, const BackwardModel& backward,
                          int n_samples, Rng& rng);

/// z_R = B(goal) rescaled to norm sqrt(d).
ZInference infer_z_goal(const Task& task, const BackwardModel& backward);

struct ZeroShotOptions {
  int n_episodes = 30;
  int n_reward_samples = 10000;
};

struct ZeroShotResult {
  std::string task;
  Eigen::VectorXd z;
  double mean_return = 0.0;  // discounted, next-state convention
  double std_return = 0.0;
  double mean_undiscounted = 0.0;
  double optimal_return = 0.0;
  double ratio = 0.0;
  bool zero_reward = false;       // z_R inference saw no reward
  bool ratio_by_convention = false;  // optimal return is 0; ratio set to 1
};

/// Exact optimal return per task name, from value iteration and analytic
/// finite-horizon propagation.
class OptimalReturnCache {
 public:
  double get(const Environment& env, const Task& task);

 private:
  std::map<std::string, double> values_;
};

/// Infers z_R (goal tasks from B(goal), reward tasks from buffer relabeling),
/// rolls the greedy policy of the ensemble-mean forward map for horizon steps
/// per episode, and scores against the exact optimum. A reward task on an
/// empty buffer acts with z = 0. Read-only in the model and the buffer.
ZeroShotResult evaluate_zero_shot(const Environment& env, const ForwardModel& forward,
                                  const BackwardModel& backward, const ReplayBuffer& buffer,
                                  const Task& task, const ZeroShotOptions& options, Rng& rng,
                                  OptimalReturnCache* cache = nullptr);

/// Rollout statistics of a fixed deterministic policy.
struct PolicyReturns {
  double mean = 0.0;
  double std = 0.0;
  double mean_undiscounted = 0.0;
};

PolicyReturns simulate_policy(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                              std::span<const ActionId> policy, const Eigen::VectorXd& state_reward,
                              int n_episodes, Rng& rng);

}  // namespace fbee
