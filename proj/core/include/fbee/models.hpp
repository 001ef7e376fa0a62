#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbee/mdp.hpp"

namespace fbee {

/// Read-only view of an ensemble of forward maps F_k(s, a, z).
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual int ensemble_size() const = 0;
  virtual int embedding_dim() const = 0;
  virtual int n_actions() const = 0;

  /// One d x (states.size() * n_actions) matrix per member; column
  /// i * n_actions + a holds F_k(states[i], a, z).
  virtual std::vector<Eigen::MatrixXd> forward_all_actions(std::span<const StateId> states,
                                                           const Eigen::VectorXd& z) const = 0;
};

/// Read-only view of the backward map B(s).
class BackwardModel {
 public:
  virtual ~BackwardModel() = default;

  virtual int embedding_dim() const = 0;
  /// d x states.size().
  virtual Eigen::MatrixXd backward(std::span<const StateId> states) const = 0;
};

/// Average over members of forward_all_actions() output.
Eigen::MatrixXd ensemble_mean(const std::vector<Eigen::MatrixXd>& member_outputs);

/// argmax_a <F(s, a, z), z> over the columns of a d x n_actions block; ties
/// resolve to the lowest action index.
ActionId greedy_action(const Eigen::Ref<const Eigen::MatrixXd>& outputs, const Eigen::VectorXd& z);

/// Greedy action of the ensemble-mean forward map at one state.
ActionId greedy_action(const ForwardModel& model, StateId state, const Eigen::VectorXd& z);

/// Greedy action of a single member at one state.
ActionId greedy_action(const ForwardModel& model, int member, StateId state,
                       const Eigen::VectorXd& z);

/// Ensemble-mean greedy action for every state in [0, n_states).
std::vector<ActionId> greedy_policy(const ForwardModel& model, int n_states,
                                    const Eigen::VectorXd& z);

}  // namespace fbee
