#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbee/mdp.hpp"

namespace fbee {

/// Stochastic policy as an n_states x n_actions table of action probabilities.
struct TabularPolicy {
  Eigen::MatrixXd probabilities;

  int n_states() const { return static_cast<int>(probabilities.rows()); }
  int n_actions() const { return static_cast<int>(probabilities.cols()); }

  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy deterministic(std::span<const ActionId> actions, int n_actions);
  /// Throws std::invalid_argument unless every row is a distribution.
  void validate() const;
};

/// Index of the (state, action) pair in pair-indexed vectors and matrices.
inline int pair_index(StateId s, ActionId a, int n_actions) { return s * n_actions + a; }

/// Discounted occupancy of (s_{t+1}, a_{t+1}) for t >= 0, indexed by pairs:
///   M[(s0,a0), (s,a)] = sum_t gamma^t P((s_{t+1}, a_{t+1}) = (s,a) | s0, a0, pi).
/// Rows carry total mass 1 / (1 - gamma).
struct SuccessorMeasure {
  Eigen::MatrixXd matrix;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;

  /// Occupancy over next states only: (n_pairs x n_states), summed over a.
  Eigen::MatrixXd state_marginal() const;
};

/// Pair-to-pair kernel P_pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
Eigen::MatrixXd pair_kernel(const DiscreteMdp& mdp, const TabularPolicy& policy);

/// M = P_pi (I - gamma P_pi)^{-1}, via a dense LU solve.
SuccessorMeasure exact_successor_measure(const DiscreteMdp& mdp, const TabularPolicy& policy);

/// Q = M r. Excludes the immediate reward r(s, a).
Eigen::VectorXd q_from_measure(const SuccessorMeasure& measure, const Eigen::VectorXd& reward);

/// Broadcasts a per-state reward to a per-pair vector: r(s, a) = r(s).
Eigen::VectorXd lift_state_reward(std::span<const double> state_reward, int n_actions);

struct ValueIterationResult {
  Eigen::VectorXd q;             // per pair, next-state reward convention
  std::vector<ActionId> policy;  // greedy, lowest index on ties
  int iterations = 0;
};

/// Optimal Q under the next-state reward convention,
///   Q(s,a) = sum_s' P(s'|s,a) max_a' [ r(s',a') + gamma Q(s',a') ],
/// iterated until the contraction bound guarantees |Q - Q*|_inf < tol.
/// The greedy policy picks argmax_a [ r(s,a) + gamma Q(s,a) ], which for
/// state-only rewards is argmax_a Q(s,a).
ValueIterationResult value_iteration(const DiscreteMdp& mdp, const Eigen::VectorXd& reward,
                                     double tol = 1e-10);

struct ReturnEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // zero for the analytic value
  int n_episodes = 0;      // zero for the analytic value
};

/// Expected sum_{t < horizon} gamma^t r(s_{t+1}, a_{t+1}) from the
/// start-region-restricted initial distribution, by exact propagation of the
/// state distribution.
ReturnEstimate exact_policy_return(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                   const TabularPolicy& policy, const Eigen::VectorXd& reward);

/// Monte Carlo counterpart of exact_policy_return.
ReturnEstimate exact_policy_return(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                   const TabularPolicy& policy, const Eigen::VectorXd& reward,
                                   int n_episodes, Rng& rng);

/// Writes a pair-indexed table as tab-separated columns: state, action, then
/// one column per matrix column.
void dump_pair_table(std::ostream& out, const Eigen::MatrixXd& table, int n_actions,
                     const std::vector<std::string>& column_names);

}  // namespace fbee
