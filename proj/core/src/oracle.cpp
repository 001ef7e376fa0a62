#include "fbee/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fbee {

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return {Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions)};
}

TabularPolicy TabularPolicy::deterministic(std::span<const ActionId> actions, int n_actions) {
  TabularPolicy policy{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions)};
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) {
      throw std::out_of_range("deterministic policy: action out of range");
    }
    policy.probabilities(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return policy;
}

void TabularPolicy::validate() const {
  for (Eigen::Index s = 0; s < probabilities.rows(); ++s) {
    if ((probabilities.row(s).array() < 0.0).any() ||
        std::abs(probabilities.row(s).sum() - 1.0) > DiscreteMdp::kProbabilityTolerance) {
      throw std::invalid_argument("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
}

Eigen::MatrixXd SuccessorMeasure::state_marginal() const {
  Eigen::MatrixXd out(matrix.rows(), n_states);
  for (int s = 0; s < n_states; ++s) {
    out.col(s) = matrix.middleCols(static_cast<Eigen::Index>(s) * n_actions, n_actions).rowwise().sum();
  }
  return out;
}

namespace {

void check_shapes(const DiscreteMdp& mdp, const TabularPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
  policy.validate();
}

}  // namespace

Eigen::MatrixXd pair_kernel(const DiscreteMdp& mdp, const TabularPolicy& policy) {
  check_shapes(mdp, policy);
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(S * A, S * A);
  for (StateId s = 0; s < S; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      const auto row = mdp.row(s, a);
      for (StateId next = 0; next < S; ++next) {
        if (row[next] == 0.0) continue;
        for (ActionId b = 0; b < A; ++b) {
          kernel(pair_index(s, a, A), pair_index(next, b, A)) =
              row[next] * policy.probabilities(next, b);
        }
      }
    }
  }
  return kernel;
}

SuccessorMeasure exact_successor_measure(const DiscreteMdp& mdp, const TabularPolicy& policy) {
  const double gamma = mdp.gamma();
  if (!(gamma < 1.0)) throw std::invalid_argument("successor measure requires gamma < 1");
  const Eigen::MatrixXd kernel = pair_kernel(mdp, policy);
  const Eigen::Index n = kernel.rows();
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - gamma * kernel;
  SuccessorMeasure measure;
  measure.matrix = system.partialPivLu().solve(kernel);
  measure.n_states = mdp.n_states();
  measure.n_actions = mdp.n_actions();
  measure.gamma = gamma;
  return measure;
}

Eigen::VectorXd q_from_measure(const SuccessorMeasure& measure, const Eigen::VectorXd& reward) {
  if (reward.size() != measure.matrix.cols()) {
    throw std::invalid_argument("q_from_measure: reward has " + std::to_string(reward.size()) +
                                " entries, measure has " + std::to_string(measure.matrix.cols()));
  }
  return measure.matrix * reward;
}

Eigen::VectorXd lift_state_reward(std::span<const double> state_reward, int n_actions) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(state_reward.size()) * n_actions);
  for (std::size_t s = 0; s < state_reward.size(); ++s) {
    r.segment(static_cast<Eigen::Index>(s) * n_actions, n_actions).setConstant(state_reward[s]);
  }
  return r;
}

ValueIterationResult value_iteration(const DiscreteMdp& mdp, const Eigen::VectorXd& reward,
                                     double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const double gamma = mdp.gamma();
  if (reward.size() != S * A) throw std::invalid_argument("value_iteration: reward shape mismatch");

  ValueIterationResult result;
  result.q = Eigen::VectorXd::Zero(S * A);
  Eigen::VectorXd backup(S);
  const double bound_factor = gamma / (1.0 - gamma);
  for (;;) {
    for (StateId s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < A; ++a) {
        best = std::max(best, reward(pair_index(s, a, A)) + gamma * result.q(pair_index(s, a, A)));
      }
      backup(s) = best;
    }
    double delta = 0.0;
    for (StateId s = 0; s < S; ++s) {
      for (ActionId a = 0; a < A; ++a) {
        const auto row = mdp.row(s, a);
        double value = 0.0;
        for (StateId next = 0; next < S; ++next) value += row[next] * backup(next);
        delta = std::max(delta, std::abs(value - result.q(pair_index(s, a, A))));
        result.q(pair_index(s, a, A)) = value;
      }
    }
    ++result.iterations;
    if (bound_factor * delta < tol) break;
  }

  result.policy.assign(static_cast<std::size_t>(S), 0);
  for (StateId s = 0; s < S; ++s) {
    double best = reward(pair_index(s, 0, A)) + gamma * result.q(pair_index(s, 0, A));
    for (ActionId a = 1; a < A; ++a) {
      const double value = reward(pair_index(s, a, A)) + gamma * result.q(pair_index(s, a, A));
      if (value > best) {
        best = value;
        result.policy[s] = a;
      }
    }
  }
  return result;
}

ReturnEstimate exact_policy_return(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                   const TabularPolicy& policy, const Eigen::VectorXd& reward) {
  check_shapes(mdp, policy);
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  if (reward.size() != S * A) throw std::invalid_argument("exact_policy_return: reward shape");
  const auto rho = start_distribution(mdp, spec);
  Eigen::VectorXd dist = Eigen::Map<const Eigen::VectorXd>(rho.data(), S);
  // Expected reward collected on arrival in each state.
  Eigen::VectorXd arrival(S);
  for (StateId s = 0; s < S; ++s) {
    arrival(s) = policy.probabilities.row(s).dot(reward.segment(static_cast<Eigen::Index>(s) * A, A));
  }
  double total = 0.0;
  double discount = 1.0;
  Eigen::VectorXd next(S);
  for (int t = 0; t < spec.horizon; ++t) {
    next.setZero();
    for (StateId s = 0; s < S; ++s) {
      if (dist(s) == 0.0) continue;
      for (ActionId a = 0; a < A; ++a) {
        const double w = dist(s) * policy.probabilities(s, a);
        if (w == 0.0) continue;
        const auto row = mdp.row(s, a);
        for (StateId n = 0; n < S; ++n) next(n) += w * row[n];
      }
    }
    total += discount * next.dot(arrival);
    discount *= mdp.gamma();
    dist.swap(next);
  }
  return {total, 0.0, 0};
}

ReturnEstimate exact_policy_return(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                   const TabularPolicy& policy, const Eigen::VectorXd& reward,
                                   int n_episodes, Rng& rng) {
  check_shapes(mdp, policy);
  if (n_episodes < 1) throw std::invalid_argument("exact_policy_return: n_episodes must be >= 1");
  const int A = mdp.n_actions();
  const auto rho = start_distribution(mdp, spec);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<double> action_probs(static_cast<std::size_t>(A));
  for (int episode = 0; episode < n_episodes; ++episode) {
    StateId state = sample_index(rho, rng);
    ActionId action = 0;
    {
      for (ActionId a = 0; a < A; ++a) action_probs[a] = policy.probabilities(state, a);
      action = sample_index(action_probs, rng);
    }
    double ret = 0.0;
    double discount = 1.0;
    for (int t = 0; t < spec.horizon; ++t) {
      state = mdp.sample_next(state, action, rng);
      for (ActionId a = 0; a < A; ++a) action_probs[a] = policy.probabilities(state, a);
      action = sample_index(action_probs, rng);
      ret += discount * reward(pair_index(state, action, A));
      discount *= mdp.gamma();
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double mean = sum / n_episodes;
  const double var = n_episodes > 1 ? std::max(0.0, (sum_sq - n_episodes * mean * mean) / (n_episodes - 1)) : 0.0;
  return {mean, std::sqrt(var / n_episodes), n_episodes};
}

void dump_pair_table(std::ostream& out, const Eigen::MatrixXd& table, int n_actions,
                     const std::vector<std::string>& column_names) {
  if (static_cast<Eigen::Index>(column_names.size()) != table.cols()) {
    throw std::invalid_argument("dump_pair_table: one name per column required");
  }
  out << "state\taction";
  for (const auto& name : column_names) out << '\t' << name;
  out << '\n';
  out.precision(17);
  for (Eigen::Index row = 0; row < table.rows(); ++row) {
    out << row / n_actions << '\t' << row % n_actions;
    for (Eigen::Index col = 0; col < table.cols(); ++col) out << '\t' << table(row, col);
    out << '\n';
  }
}

}  // namespace fbee
