#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fbee/mdp.hpp"
#include "fbee/models.hpp"
#include "fbee/nn.hpp"
#include "fbee/replay_buffer.hpp"

namespace fbee {

enum class TargetActionRule {
  PerMember,     // a* from the member's own target network
  EnsembleMean,  // a* from the mean of all members' target networks
};

struct FbConfig {
  int embedding_dim = 16;
  int ensemble_size = 5;
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-4;
  int batch_size = 256;
  double target_momentum = 0.99;
  double ortho_coef = 1.0;
  double mix_ratio = 0.3;
  /// Attraction term uses B(s_{i+1}); false evaluates B(s_i) instead.
  bool attraction_at_next_state = true;
  TargetActionRule target_action = TargetActionRule::PerMember;
  /// Feed the environment feature map to B instead of a one-hot state.
  bool use_feature_map = false;

  void validate() const;
  friend bool operator==(const FbConfig&, const FbConfig&) = default;
};

void to_json(nlohmann::json& j, const FbConfig& c);
void from_json(const nlohmann::json& j, FbConfig& c);

/// Per-member loss decomposition: total = td - attraction + ortho_coef * ortho.
struct FbLossReport {
  double td = 0.0;
  double attraction = 0.0;
  double ortho = 0.0;
  double total = 0.0;
};

/// K forward networks F_k(s, a, z) and one backward network B(s), each with a
/// Polyak target copy and its own Adam state.
///
/// Inputs are one-hot state and action codes (z is appended for F); with
/// use_feature_map the backward network reads the feature vector instead.
class FbEnsemble : public ForwardModel, public BackwardModel {
 public:
  FbEnsemble(const FbConfig& config, int n_states, int n_actions, double gamma,
             std::optional<FeatureMap> features, Rng& init_rng);

  const FbConfig& config() const { return config_; }
  int n_states() const { return n_states_; }
  int n_actions() const override { return n_actions_; }
  int embedding_dim() const override { return config_.embedding_dim; }
  int ensemble_size() const override { return config_.ensemble_size; }
  double gamma() const { return gamma_; }

  nn::Mlp& forward_net(int k) { return forward_.at(k); }
  const nn::Mlp& forward_net(int k) const { return forward_.at(k); }
  nn::TargetCopy& forward_target(int k) { return forward_target_.at(k); }
  const nn::TargetCopy& forward_target(int k) const { return forward_target_.at(k); }
  nn::AdamState& forward_optimizer(int k) { return forward_opt_.at(k); }
  const nn::AdamState& forward_optimizer(int k) const { return forward_opt_.at(k); }
  nn::Mlp& backward_net() { return backward_; }
  const nn::Mlp& backward_net() const { return backward_; }
  nn::TargetCopy& backward_target() { return backward_target_; }
  const nn::TargetCopy& backward_target() const { return backward_target_; }
  nn::AdamState& backward_optimizer() { return backward_opt_; }
  const nn::AdamState& backward_optimizer() const { return backward_opt_; }

  std::int64_t train_steps() const { return train_steps_; }
  void set_train_steps(std::int64_t steps) { train_steps_ = steps; }

  /// F input for (states[i], actions[i], z.col(i)).
  nn::InputBatch encode_forward(std::span<const StateId> states, std::span<const ActionId> actions,
                                const Eigen::MatrixXd& z) const;
  nn::InputBatch encode_backward(std::span<const StateId> states) const;

  std::vector<Eigen::MatrixXd> forward_all_actions(std::span<const StateId> states,
                                                   const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd backward(std::span<const StateId> states) const override;

  /// Target-network counterparts of the queries above.
  std::vector<Eigen::MatrixXd> target_forward_all_actions(std::span<const StateId> states,
                                                          const Eigen::MatrixXd& z) const;

  friend bool operator==(const FbEnsemble& a, const FbEnsemble& b);

 private:
  FbConfig config_;
  int n_states_;
  int n_actions_;
  double gamma_;
  std::optional<FeatureMap> features_;
  std::vector<nn::Mlp> forward_;
  std::vector<nn::TargetCopy> forward_target_;
  std::vector<nn::AdamState> forward_opt_;
  nn::Mlp backward_;
  nn::TargetCopy backward_target_;
  nn::AdamState backward_opt_;
  std::int64_t train_steps_ = 0;
};

/// sqrt(d) * v / |v|. A zero vector is returned unchanged.
Eigen::VectorXd rescale_to_sphere(const Eigen::VectorXd& v);

/// Uniform sample on the radius-sqrt(d) sphere.
Eigen::VectorXd sample_z_sphere(int d, Rng& rng);

struct TrainingZ {
  Eigen::VectorXd z;
  bool from_backward = false;
};

/// With probability mix_ratio, B(s') of a buffer-sampled next state rescaled
/// to norm sqrt(d); otherwise a sphere sample. An empty buffer always yields
/// a sphere sample.
TrainingZ sample_training_z(const ReplayBuffer& buffer, const BackwardModel& backward, int d,
                            double mix_ratio, Rng& rng);

/// Batched form of sample_training_z with an identical draw order per column.
Eigen::MatrixXd sample_training_zs(const ReplayBuffer& buffer, const BackwardModel& backward, int d,
                                   double mix_ratio, int count, Rng& rng,
                                   std::vector<bool>* from_backward = nullptr);

struct TrainingBatch {
  std::vector<StateId> states;
  std::vector<ActionId> actions;
  std::vector<StateId> next_states;
  Eigen::MatrixXd z;  // d x b

  int size() const { return static_cast<int>(states.size()); }
};

struct OrthoPenalty {
  double value = 0.0;
  Eigen::MatrixXd output_gradient;  // d x b, gradient w.r.t. the embeddings
};

/// |C - I|_F^2 with C = (1/b) sum_j B_j B_j^T over the columns of
/// `embeddings`, and its exact gradient with respect to those columns.
OrthoPenalty ortho_penalty(const Eigen::MatrixXd& embeddings);

struct OrthoPenaltyGradients {
  double value = 0.0;
  nn::ParameterSet backward;
};

/// Orthonormality penalty of B on a batch of states with parameter gradients.
OrthoPenaltyGradients ortho_penalty(const FbEnsemble& ensemble, std::span<const StateId> states);

struct MemberGradients {
  nn::ParameterSet forward;
  nn::ParameterSet backward;
};

/// Loss of forward member `member` paired with B on one batch:
///   td = 1/(2 b (b-1)) sum_{i != j} ( <F_k(s_i,a_i,z_i), B(s'_j)>
///            - gamma <F_k^-(s_{i+1}, a*_i, z_i), B^-(s'_j)> )^2
///   attraction = (1/b) sum_i <F_k(s_i,a_i,z_i), B(s_{i+1})>
///   ortho = |C - I|_F^2 on B(s'_j)
/// The future states s'_j are the batch's own next states; pairs i == j are
/// excluded because they are not independent of row i. Target branches carry
/// no gradient. Throws nn::NonFiniteError naming the offending term.
FbLossReport fb_loss_and_grads(const FbEnsemble& ensemble, int member, const TrainingBatch& batch,
                               MemberGradients* grads);

struct TrainStepReport {
  std::vector<FbLossReport> members;
  bool skipped = false;  // buffer smaller than the batch size
};

/// One gradient step for every member and for B (B's gradient is the member
/// average), followed by Polyak updates of all targets.
TrainStepReport train_step(FbEnsemble& ensemble, const ReplayBuffer& buffer, Rng& rng);

/// Draws a uniform batch with per-row training z's.
TrainingBatch sample_training_batch(const FbEnsemble& ensemble, const ReplayBuffer& buffer, Rng& rng);

}  // namespace fbee
