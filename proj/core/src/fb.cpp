#include "fbee/fb.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fbee {

namespace {

std::string to_string(TargetActionRule rule) {
  return rule == TargetActionRule::PerMember ? "per_member" : "ensemble_mean";
}

TargetActionRule target_rule_from_string(const std::string& name) {
  if (name == "per_member") return TargetActionRule::PerMember;
  if (name == "ensemble_mean") return TargetActionRule::EnsembleMean;
  throw std::invalid_argument("unknown target_action rule: " + name);
}

std::vector<int> layer_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

bool same_parameters(const nn::ParameterSet& a, const nn::ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weight != b[l].weight || a[l].bias != b[l].bias) return false;
  }
  return true;
}

bool same_adam(const nn::AdamState& a, const nn::AdamState& b) {
  return a.step == b.step && a.config.learning_rate == b.config.learning_rate &&
         a.config.beta1 == b.config.beta1 && a.config.beta2 == b.config.beta2 &&
         a.config.epsilon == b.config.epsilon && same_parameters(a.first_moment, b.first_moment) &&
         same_parameters(a.second_moment, b.second_moment);
}

void require_finite(double value, const char* term) {
  if (!std::isfinite(value)) throw nn::NonFiniteError(std::string("fb loss: non-finite ") + term + " term");
}

// Everything a member contributes to one step, before B's backward pass.
struct MemberPass {
  FbLossReport report;
  nn::ParameterSet forward_grads;
  Eigen::MatrixXd next_upstream;     // d x b gradient on B(s_{i+1}), ortho excluded
  Eigen::MatrixXd current_upstream;  // d x b gradient on B(s_i); empty unless used
};

// Quantities shared by all members for one batch.
struct BatchContext {
  nn::InputBatch next_input;
  nn::Mlp::Tape next_tape;
  Eigen::MatrixXd next_b;         // B(s_{i+1})
  Eigen::MatrixXd next_b_target;  // B^-(s_{i+1})
  nn::InputBatch current_input;
  nn::Mlp::Tape current_tape;
  Eigen::MatrixXd current_b;  // B(s_i), only when the attraction uses it
  nn::InputBatch forward_input;
  std::vector<Eigen::MatrixXd> target_outputs;  // EnsembleMean rule only
  std::vector<ActionId> mean_target_actions;
  OrthoPenalty ortho;
};

nn::InputBatch all_actions_input(int n_states, int n_actions, std::span<const StateId> states,
                                 const Eigen::MatrixXd& z, bool shared_z) {
  nn::InputBatch batch;
  batch.hot_width = n_states + n_actions;
  batch.hot_per_sample = 2;
  batch.hot.reserve(states.size() * n_actions * 2);
  batch.dense.resize(z.rows(), static_cast<Eigen::Index>(states.size()) * n_actions);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] < 0 || states[i] >= n_states) throw std::out_of_range("forward query: state out of range");
    for (int a = 0; a < n_actions; ++a) {
      batch.hot.push_back(states[i]);
      batch.hot.push_back(n_states + a);
      batch.dense.col(static_cast<Eigen::Index>(i) * n_actions + a) =
          shared_z ? z.col(0) : z.col(static_cast<Eigen::Index>(i));
    }
  }
  return batch;
}

std::vector<ActionId> greedy_columns(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& z,
                                     int n_actions) {
  std::vector<ActionId> actions(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    actions[i] = greedy_action(outputs.middleCols(i * n_actions, n_actions), z.col(i));
  }
  return actions;
}

BatchContext make_context(const FbEnsemble& ensemble, const TrainingBatch& batch) {
  BatchContext ctx;
  const auto& cfg = ensemble.config();
  ctx.next_input = ensemble.encode_backward(batch.next_states);
  ctx.next_b = ensemble.backward_net().forward(ctx.next_input, ctx.next_tape);
  ctx.next_b_target = ensemble.backward_target().net.forward(ctx.next_input);
  if (!cfg.attraction_at_next_state) {
    ctx.current_input = ensemble.encode_backward(batch.states);
    ctx.current_b = ensemble.backward_net().forward(ctx.current_input, ctx.current_tape);
  }
  ctx.forward_input = ensemble.encode_forward(batch.states, batch.actions, batch.z);
  if (cfg.target_action == TargetActionRule::EnsembleMean) {
    ctx.target_outputs = ensemble.target_forward_all_actions(batch.next_states, batch.z);
    ctx.mean_target_actions = greedy_columns(ensemble_mean(ctx.target_outputs), batch.z, ensemble.n_actions());
  }
  ctx.ortho = ortho_penalty(ctx.next_b);
  return ctx;
}

MemberPass member_pass(const FbEnsemble& ensemble, int member, const TrainingBatch& batch,
                       const BatchContext& ctx) {
  const auto& cfg = ensemble.config();
  const int b = batch.size();
  const int A = ensemble.n_actions();
  const double gamma = ensemble.gamma();

  nn::Mlp::Tape tape;
  const nn::Mlp& net = ensemble.forward_net(member);
  const Eigen::MatrixXd f = net.forward(ctx.forward_input, tape);

  // Target forward values at the greedy next action; no gradient flows here.
  Eigen::MatrixXd own_targets;
  const Eigen::MatrixXd* targets = nullptr;
  std::vector<ActionId> next_actions;
  if (cfg.target_action == TargetActionRule::PerMember) {
    const auto all = all_actions_input(ensemble.n_states(), A, batch.next_states, batch.z, false);
    own_targets = ensemble.forward_target(member).net.forward(all);
    targets = &own_targets;
    next_actions = greedy_columns(own_targets, batch.z, A);
  } else {
    targets = &ctx.target_outputs[member];
    next_actions = ctx.mean_target_actions;
  }
  Eigen::MatrixXd f_target(f.rows(), b);
  for (int i = 0; i < b; ++i) f_target.col(i) = targets->col(i * A + next_actions[i]);

  Eigen::MatrixXd diff(b, b);
  diff.noalias() = f.transpose() * ctx.next_b;
  diff.noalias() -= gamma * (f_target.transpose() * ctx.next_b_target);
  diff.diagonal().setZero();

  const double pairs = static_cast<double>(b) * (b - 1);
  MemberPass pass;
  auto& report = pass.report;
  report.td = diff.squaredNorm() / (2.0 * pairs);
  const Eigen::MatrixXd& attract_b = cfg.attraction_at_next_state ? ctx.next_b : ctx.current_b;
  report.attraction = f.cwiseProduct(attract_b).sum() / b;
  report.ortho = ctx.ortho.value;
  require_finite(report.td, "td");
  require_finite(report.attraction, "attraction");
  require_finite(report.ortho, "orthonormality");
  report.total = report.td - report.attraction + cfg.ortho_coef * report.ortho;
  require_finite(report.total, "total");

  const Eigen::MatrixXd g = diff / pairs;  // dL/dM on off-diagonal pairs
  Eigen::MatrixXd df(f.rows(), b);
  df.noalias() = ctx.next_b * g.transpose();
  df -= attract_b / b;
  pass.forward_grads = net.backward(ctx.forward_input, tape, df);

  pass.next_upstream.resize(f.rows(), b);
  pass.next_upstream.noalias() = f * g;
  if (cfg.attraction_at_next_state) {
    pass.next_upstream -= f / b;
  } else {
    pass.current_upstream = -f / b;
  }
  return pass;
}

nn::ParameterSet backward_grads(const FbEnsemble& ensemble, const BatchContext& ctx,
                                const Eigen::MatrixXd& next_upstream,
                                const Eigen::MatrixXd& current_upstream) {
  const nn::Mlp& net = ensemble.backward_net();
  auto grads = net.backward(ctx.next_input, ctx.next_tape, next_upstream);
  if (!ensemble.config().attraction_at_next_state) {
    nn::add_scaled(grads, net.backward(ctx.current_input, ctx.current_tape, current_upstream), 1.0);
  }
  return grads;
}

}  // namespace

void FbConfig::validate() const {
  if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
  if (ensemble_size < 1) throw std::invalid_argument("ensemble_size must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(target_momentum > 0.0 && target_momentum < 1.0)) {
    throw std::invalid_argument("target_momentum must lie in (0, 1)");
  }
  if (!(ortho_coef >= 0.0)) throw std::invalid_argument("ortho_coef must be non-negative");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw std::invalid_argument("mix_ratio must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const FbConfig& c) {
  j = nlohmann::json{{"embedding_dim", c.embedding_dim},
                     {"ensemble_size", c.ensemble_size},
                     {"hidden", c.hidden},
                     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"target_momentum", c.target_momentum},
                     {"ortho_coef", c.ortho_coef},
                     {"mix_ratio", c.mix_ratio},
                     {"attraction_at_next_state", c.attraction_at_next_state},
                     {"target_action", to_string(c.target_action)},
                     {"use_feature_map", c.use_feature_map}};
}

void from_json(const nlohmann::json& j, FbConfig& c) {
  FbConfig d;
  c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  c.ensemble_size = j.value("ensemble_size", d.ensemble_size);
  c.hidden = j.value("hidden", d.hidden);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.target_momentum = j.value("target_momentum", d.target_momentum);
  c.ortho_coef = j.value("ortho_coef", d.ortho_coef);
  c.mix_ratio = j.value("mix_ratio", d.mix_ratio);
  c.attraction_at_next_state = j.value("attraction_at_next_state", d.attraction_at_next_state);
  c.target_action = target_rule_from_string(j.value("target_action", to_string(d.target_action)));
  c.use_feature_map = j.value("use_feature_map", d.use_feature_map);
}

FbEnsemble::FbEnsemble(const FbConfig& config, int n_states, int n_actions, double gamma,
                       std::optional<FeatureMap> features, Rng& init_rng)
    : config_(config), n_states_(n_states), n_actions_(n_actions), gamma_(gamma),
      features_(std::move(features)) {
  config_.validate();
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("FbEnsemble: empty state or action space");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("FbEnsemble: gamma must lie in [0, 1)");
  if (config_.use_feature_map && !features_) {
    throw std::invalid_argument("FbEnsemble: use_feature_map requires a feature map");
  }
  if (!config_.use_feature_map) features_.reset();
  const nn::AdamConfig adam{config_.learning_rate};
  const int d = config_.embedding_dim;
  const auto f_sizes = layer_sizes(n_states + n_actions + d, config_.hidden, d);
  for (int k = 0; k < config_.ensemble_size; ++k) {
    forward_.emplace_back(f_sizes, init_rng);
    forward_target_.emplace_back(forward_.back(), config_.target_momentum);
    forward_opt_.push_back(nn::AdamState::for_network(forward_.back(), adam));
  }
  const int b_input = features_ ? features_->feature_dim() : n_states;
  backward_ = nn::Mlp(layer_sizes(b_input, config_.hidden, d), init_rng);
  backward_target_ = nn::TargetCopy(backward_, config_.target_momentum);
  backward_opt_ = nn::AdamState::for_network(backward_, adam);
}

nn::InputBatch FbEnsemble::encode_forward(std::span<const StateId> states,
                                          std::span<const ActionId> actions,
                                          const Eigen::MatrixXd& z) const {
  if (states.size() != actions.size() || z.cols() != static_cast<Eigen::Index>(states.size()) ||
      z.rows() != config_.embedding_dim) {
    throw std::invalid_argument("encode_forward: batch shapes disagree");
  }
  nn::InputBatch batch;
  batch.hot_width = n_states_ + n_actions_;
  batch.hot_per_sample = 2;
  batch.hot.reserve(states.size() * 2);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] < 0 || states[i] >= n_states_ || actions[i] < 0 || actions[i] >= n_actions_) {
      throw std::out_of_range("encode_forward: state or action out of range");
    }
    batch.hot.push_back(states[i]);
    batch.hot.push_back(n_states_ + actions[i]);
  }
  batch.dense = z;
  return batch;
}

nn::InputBatch FbEnsemble::encode_backward(std::span<const StateId> states) const {
  nn::InputBatch batch;
  const auto n = static_cast<Eigen::Index>(states.size());
  if (features_) {
    batch.dense.resize(features_->feature_dim(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto phi = (*features_)(states[i]);
      for (int f = 0; f < features_->feature_dim(); ++f) batch.dense(f, i) = phi[f];
    }
    return batch;
  }
  batch.hot_width = n_states_;
  batch.hot_per_sample = 1;
  batch.hot.reserve(states.size());
  for (StateId s : states) {
    if (s < 0 || s >= n_states_) throw std::out_of_range("encode_backward: state out of range");
    batch.hot.push_back(s);
  }
  batch.dense.resize(0, n);
  return batch;
}


std::vector<Eigen::MatrixXd> FbEnsemble::forward_all_actions(std::span<const StateId> states,
                                                             const Eigen::VectorXd& z) const {
  if (z.size() != config_.embedding_dim) throw std::invalid_argument("forward query: z has the wrong size");
  const auto input = all_actions_input(n_states_, n_actions_, states, z, true);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(forward_.size());
  for (const auto& net : forward_) out.push_back(net.forward(input));
  return out;
}

Eigen::MatrixXd FbEnsemble::backward(std::span<const StateId> states) const {
  return backward_.forward(encode_backward(states));
}

std::vector<Eigen::MatrixXd> FbEnsemble::target_forward_all_actions(std::span<const StateId> states,
                                                                    const Eigen::MatrixXd& z) const {
  if (z.rows() != config_.embedding_dim || z.cols() != static_cast<Eigen::Index>(states.size())) {
    throw std::invalid_argument("target query: z must hold one column per state");
  }
  const auto input = all_actions_input(n_states_, n_actions_, states, z, false);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(forward_target_.size());
  for (const auto& target : forward_target_) out.push_back(target.net.forward(input));
  return out;
}

bool operator==(const FbEnsemble& a, const FbEnsemble& b) {
  if (!(a.config_ == b.config_) || a.n_states_ != b.n_states_ || a.n_actions_ != b.n_actions_ ||
      a.gamma_ != b.gamma_ || a.train_steps_ != b.train_steps_) {
    return false;
  }
  for (std::size_t k = 0; k < a.forward_.size(); ++k) {
    if (!(a.forward_[k] == b.forward_[k]) || !(a.forward_target_[k].net == b.forward_target_[k].net) ||
        a.forward_target_[k].tau != b.forward_target_[k].tau || !same_adam(a.forward_opt_[k], b.forward_opt_[k])) {
      return false;
    }
  }
  return a.backward_ == b.backward_ && a.backward_target_.net == b.backward_target_.net &&
         a.backward_target_.tau == b.backward_target_.tau && same_adam(a.backward_opt_, b.backward_opt_);
}

Eigen::VectorXd rescale_to_sphere(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm == 0.0) return v;
  return std::sqrt(static_cast<double>(v.size())) * v / norm;
}

Eigen::VectorXd sample_z_sphere(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_z_sphere: d must be >= 1");
  std::normal_distribution<double> gauss;
  Eigen::VectorXd g(d);
  do {
    for (int i = 0; i < d; ++i) g(i) = gauss(rng);
  } while (g.squaredNorm() == 0.0);
  return rescale_to_sphere(g);
}

Eigen::MatrixXd sample_training_zs(const ReplayBuffer& buffer, const BackwardModel& backward, int d,
                                   double mix_ratio, int count, Rng& rng,
                                   std::vector<bool>* from_backward) {
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw std::invalid_argument("mix_ratio must lie in [0, 1]");
  Eigen::MatrixXd zs(d, count);
  std::vector<StateId> states;
  std::vector<int> columns;
  std::uniform_real_distribution<double> unit;
  for (int c = 0; c < count; ++c) {
    const double u = unit(rng);
    if (!buffer.empty() && u < mix_ratio) {
      states.push_back(buffer.sample(rng).next_state);
      columns.push_back(c);
    } else {
      zs.col(c) = sample_z_sphere(d, rng);
    }
  }
  if (from_backward) from_backward->assign(static_cast<std::size_t>(count), false);
  if (!states.empty()) {
    const Eigen::MatrixXd embeddings = backward.backward(states);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      zs.col(columns[i]) = rescale_to_sphere(embeddings.col(static_cast<Eigen::Index>(i)));
      if (from_backward) (*from_backward)[columns[i]] = true;
    }
  }
  return zs;
}

TrainingZ sample_training_z(const ReplayBuffer& buffer, const BackwardModel& backward, int d,
                            double mix_ratio, Rng& rng) {
  std::vector<bool> flag;
  Eigen::MatrixXd z = sample_training_zs(buffer, backward, d, mix_ratio, 1, rng, &flag);
  return {z.col(0), flag.front()};
}

OrthoPenalty ortho_penalty(const Eigen::MatrixXd& embeddings) {
  const auto b = embeddings.cols();
  if (b < 1) throw std::invalid_argument("ortho_penalty: empty batch");
  const auto d = embeddings.rows();
  Eigen::MatrixXd c(d, d);
  c.noalias() = embeddings * embeddings.transpose() / static_cast<double>(b);
  c -= Eigen::MatrixXd::Identity(d, d);
  OrthoPenalty out;
  out.value = c.squaredNorm();
  out.output_gradient.resize(d, b);
  out.output_gradient.noalias() = (4.0 / static_cast<double>(b)) * c * embeddings;
  return out;
}

OrthoPenaltyGradients ortho_penalty(const FbEnsemble& ensemble, std::span<const StateId> states) {
  if (states.size() < 2) throw std::invalid_argument("ortho_penalty: batch size must be >= 2");
  const auto input = ensemble.encode_backward(states);
  nn::Mlp::Tape tape;
  const auto embeddings = ensemble.backward_net().forward(input, tape);
  const auto penalty = ortho_penalty(embeddings);
  return {penalty.value, ensemble.backward_net().backward(input, tape, penalty.output_gradient)};
}

FbLossReport fb_loss_and_grads(const FbEnsemble& ensemble, int member, const TrainingBatch& batch,
                               MemberGradients* grads) {
  if (batch.size() < 2) throw std::invalid_argument("fb loss: batch size must be >= 2");
  if (member < 0 || member >= ensemble.ensemble_size()) throw std::out_of_range("fb loss: member out of range");
  const auto ctx = make_context(ensemble, batch);
  auto pass = member_pass(ensemble, member, batch, ctx);
  if (grads) {
    Eigen::MatrixXd upstream = pass.next_upstream + ensemble.config().ortho_coef * ctx.ortho.output_gradient;
    grads->forward = std::move(pass.forward_grads);
    grads->backward = backward_grads(ensemble, ctx, upstream, pass.current_upstream);
  }
  return pass.report;
}

TrainingBatch sample_training_batch(const FbEnsemble& ensemble, const ReplayBuffer& buffer, Rng& rng) {
  const int b = ensemble.config().batch_size;
  TrainingBatch batch;
  batch.states.reserve(b);
  batch.actions.reserve(b);
  batch.next_states.reserve(b);
  for (int i = 0; i < b; ++i) {
    const auto& t = buffer.sample(rng);
    batch.states.push_back(t.state);
    batch.actions.push_back(t.action);
    batch.next_states.push_back(t.next_state);
  }
  batch.z = sample_training_zs(buffer, ensemble, ensemble.embedding_dim(), ensemble.config().mix_ratio, b, rng);
  return batch;
}

TrainStepReport train_step(FbEnsemble& ensemble, const ReplayBuffer& buffer, Rng& rng) {
  TrainStepReport report;
  if (buffer.size() < static_cast<std::size_t>(ensemble.config().batch_size)) {
    report.skipped = true;
    return report;
  }
  const auto batch = sample_training_batch(ensemble, buffer, rng);
  const auto ctx = make_context(ensemble, batch);
  const int K = ensemble.ensemble_size();

  Eigen::MatrixXd next_upstream = Eigen::MatrixXd::Zero(ctx.next_b.rows(), ctx.next_b.cols());
  Eigen::MatrixXd current_upstream;
  if (ctx.current_b.size() > 0) current_upstream = Eigen::MatrixXd::Zero(ctx.current_b.rows(), ctx.current_b.cols());
  std::vector<nn::ParameterSet> forward_grads;
  forward_grads.reserve(K);
  for (int k = 0; k < K; ++k) {
    auto pass = member_pass(ensemble, k, batch, ctx);
    report.members.push_back(pass.report);
    forward_grads.push_back(std::move(pass.forward_grads));
    next_upstream += pass.next_upstream;
    if (pass.current_upstream.size() > 0) current_upstream += pass.current_upstream;
  }
  next_upstream /= K;
  if (current_upstream.size() > 0) current_upstream /= K;
  next_upstream += ensemble.config().ortho_coef * ctx.ortho.output_gradient;
  const auto b_grads = backward_grads(ensemble, ctx, next_upstream, current_upstream);

  for (int k = 0; k < K; ++k) nn::adam_step(ensemble.forward_net(k), forward_grads[k], ensemble.forward_optimizer(k));
  nn::adam_step(ensemble.backward_net(), b_grads, ensemble.backward_optimizer());
  for (int k = 0; k < K; ++k) nn::polyak_update(ensemble.forward_target(k), ensemble.forward_net(k));
  nn::polyak_update(ensemble.backward_target(), ensemble.backward_net());
  ensemble.set_train_steps(ensemble.train_steps() + 1);
  return report;
}

}  // namespace fbee
