#include "fbee/models.hpp"

#include <numeric>
#include <stdexcept>

namespace fbee {

Eigen::MatrixXd ensemble_mean(const std::vector<Eigen::MatrixXd>& member_outputs) {
  if (member_outputs.empty()) throw std::invalid_argument("ensemble_mean: no members");
  Eigen::MatrixXd mean = member_outputs.front();
  for (std::size_t k = 1; k < member_outputs.size(); ++k) mean += member_outputs[k];
  return mean / static_cast<double>(member_outputs.size());
}

ActionId greedy_action(const Eigen::Ref<const Eigen::MatrixXd>& outputs, const Eigen::VectorXd& z) {
  if (outputs.rows() != z.size()) throw std::invalid_argument("greedy_action: z has the wrong size");
  ActionId best = 0;
  double best_score = outputs.col(0).dot(z);
  for (Eigen::Index a = 1; a < outputs.cols(); ++a) {
    const double score = outputs.col(a).dot(z);
    if (score > best_score) {
      best_score = score;
      best = static_cast<ActionId>(a);
    }
  }
  return best;
}

ActionId greedy_action(const ForwardModel& model, StateId state, const Eigen::VectorXd& z) {
  const StateId states[] = {state};
  return greedy_action(ensemble_mean(model.forward_all_actions(states, z)), z);
}

ActionId greedy_action(const ForwardModel& model, int member, StateId state,
                       const Eigen::VectorXd& z) {
  const StateId states[] = {state};
  return greedy_action(model.forward_all_actions(states, z).at(static_cast<std::size_t>(member)), z);
}

std::vector<ActionId> greedy_policy(const ForwardModel& model, int n_states,
                                    const Eigen::VectorXd& z) {
  std::vector<StateId> states(static_cast<std::size_t>(n_states));
  std::iota(states.begin(), states.end(), 0);
  const Eigen::MatrixXd mean = ensemble_mean(model.forward_all_actions(states, z));
  const int A = model.n_actions();
  std::vector<ActionId> policy(states.size());
  for (int s = 0; s < n_states; ++s) policy[s] = greedy_action(mean.middleCols(s * A, A), z);
  return policy;
}

}  // namespace fbee
