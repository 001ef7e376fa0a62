#include "fbee/explorer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "fbee/fb.hpp"
#include "fbee/uncertainty.hpp"

namespace fbee {

std::string to_string(ExplorationKind kind) {
  switch (kind) {
    case ExplorationKind::FbeeQ: return "fbee_q";
    case ExplorationKind::FbeeF: return "fbee_f";
    case ExplorationKind::FbRandomZ: return "fb_random_z";
    case ExplorationKind::RandomAction: return "random_action";
  }
  throw std::invalid_argument("unknown exploration kind");
}

ExplorationKind exploration_kind_from_string(const std::string& name) {
  if (name == "fbee_q") return ExplorationKind::FbeeQ;
  if (name == "fbee_f") return ExplorationKind::FbeeF;
  if (name == "fb_random_z") return ExplorationKind::FbRandomZ;
  if (name == "random_action") return ExplorationKind::RandomAction;
  throw std::invalid_argument("unknown exploration strategy: " + name);
}

void ExplorationStrategy::validate() const {
  if (z_update_period < 1) throw std::invalid_argument("z_update_period must be >= 1");
  if (n_z_candidates < 1) throw std::invalid_argument("n_z_candidates must be >= 1");
  if (n_score_states < 1) throw std::invalid_argument("n_score_states must be >= 1");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const ExplorationStrategy& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"z_update_period", s.z_update_period},
                     {"n_z_candidates", s.n_z_candidates},
                     {"n_score_states", s.n_score_states},
                     {"epsilon", s.epsilon},
                     {"score_at_current_state", s.score_at_current_state}};
}

void from_json(const nlohmann::json& j, ExplorationStrategy& s) {
  ExplorationStrategy d;
  s.kind = exploration_kind_from_string(j.value("kind", to_string(d.kind)));
  s.z_update_period = j.value("z_update_period", d.z_update_period);
  s.n_z_candidates = j.value("n_z_candidates", d.n_z_candidates);
  s.n_score_states = j.value("n_score_states", d.n_score_states);
  s.epsilon = j.value("epsilon", d.epsilon);
  s.score_at_current_state = j.value("score_at_current_state", d.score_at_current_state);
}

double exploration_score(const ForwardModel& model, ExplorationKind kind, const Eigen::VectorXd& z,
                         std::span<const StateId> states, std::span<const int> counts) {
  if (states.size() != counts.size() || states.empty()) {
    throw std::invalid_argument("exploration_score: states and counts disagree");
  }
  const int A = model.n_actions();
  const int K = model.ensemble_size();
  const auto outputs = model.forward_all_actions(states, z);
  const Eigen::MatrixXd mean = ensemble_mean(outputs);
  Eigen::MatrixXd members(model.embedding_dim(), K);
  double total = 0.0;
  int weight = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto first = static_cast<Eigen::Index>(i) * A;
    const ActionId a = greedy_action(mean.middleCols(first, A), z);
    for (int k = 0; k < K; ++k) members.col(k) = outputs[k].col(first + a);
    const double value = kind == ExplorationKind::FbeeF ? covariance_trace(members) : q_variance(members, z).variance;
    total += counts[i] * value;
    weight += counts[i];
  }
  return total / weight;
}

ZSelection select_exploration_z(const ForwardModel& model, const ReplayBuffer& buffer,
                                const ExplorationStrategy& strategy, Rng& rng,
                                std::optional<StateId> current_state) {
  ZSelection out;
  const int d = model.embedding_dim();
  switch (strategy.kind) {
    case ExplorationKind::RandomAction:
      out.z = Eigen::VectorXd::Zero(d);
      return out;
    case ExplorationKind::FbRandomZ:
      out.z = sample_z_sphere(d, rng);
      return out;
    case ExplorationKind::FbeeQ:
    case ExplorationKind::FbeeF:
      break;
  }
  if (model.ensemble_size() < 2) throw std::invalid_argument("uncertainty-driven exploration needs K >= 2");
  const bool at_current = strategy.score_at_current_state && current_state.has_value();
  if (!at_current && buffer.empty()) {
    out.z = sample_z_sphere(d, rng);
    out.fallback = true;
    return out;
  }
  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(strategy.n_z_candidates);
  for (int c = 0; c < strategy.n_z_candidates; ++c) candidates.push_back(sample_z_sphere(d, rng));

  std::vector<StateId> states;
  std::vector<int> counts;
  if (at_current) {
    states.push_back(*current_state);
    counts.push_back(1);
  } else {
    std::map<StateId, int> tally;
    for (int i = 0; i < strategy.n_score_states; ++i) ++tally[buffer.sample(rng).state];
    for (const auto& [s, n] : tally) {
      states.push_back(s);
      counts.push_back(n);
    }
  }
  out.scores.reserve(candidates.size());
  for (const auto& z : candidates) out.scores.push_back(exploration_score(model, strategy.kind, z, states, counts));
  out.chosen = static_cast<int>(std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
  out.score = out.scores[out.chosen];
  out.z = candidates[out.chosen];
  return out;
}

ActionId exploration_action(const ExplorationStrategy& strategy, const ForwardModel& model,
                            StateId state, const Eigen::VectorXd& z, Rng& rng) {
  std::uniform_int_distribution<ActionId> uniform(0, model.n_actions() - 1);
  if (strategy.kind == ExplorationKind::RandomAction) return uniform(rng);
  std::uniform_real_distribution<double> unit;
  if (unit(rng) < strategy.epsilon) return uniform(rng);
  return greedy_action(model, state, z);
}

CollectionState::CollectionState(int n_states)
    : visited(static_cast<std::size_t>(n_states), 0), episode_visited(static_cast<std::size_t>(n_states), 0) {}

double CollectionState::coverage() const {
  if (visited.empty()) return 0.0;
  return static_cast<double>(std::count(visited.begin(), visited.end(), 1)) / static_cast<double>(visited.size());
}

void collect(const DiscreteMdp& mdp, const EpisodeSpec& spec, const ForwardModel& model,
             const ExplorationStrategy& strategy, ReplayBuffer& buffer, CollectionState& state,
             Rng& rng, std::int64_t n_steps, double train_ratio, const TrainHook& train_hook) {
  strategy.validate();
  if (n_steps < 1) throw std::invalid_argument("collect: n_steps must be >= 1");
  if (spec.horizon < 1) throw std::invalid_argument("collect: horizon must be >= 1");
  if (!(train_ratio >= 0.0)) throw std::invalid_argument("collect: train_ratio must be non-negative");
  if (model.n_actions() != mdp.n_actions()) throw std::invalid_argument("collect: model and MDP disagree on actions");
  const auto n = static_cast<std::size_t>(mdp.n_states());
  if (state.visited.size() != n) state.visited.assign(n, 0);
  if (state.episode_visited.size() != n) state.episode_visited.assign(n, 0);
  const auto start = start_distribution(mdp, spec);

  auto mark = [&](StateId s) {
    state.visited[s] = 1;
    state.episode_visited[s] = 1;
  };
  for (std::int64_t i = 0; i < n_steps; ++i) {
    if (state.episode_step == 0) {
      std::fill(state.episode_visited.begin(), state.episode_visited.end(), 0);
      state.state = sample_index(start, rng);
      mark(state.state);
    }
    if (state.episode_step % strategy.z_update_period == 0) {
      auto selection = select_exploration_z(model, buffer, strategy, rng, state.state);
      state.z = std::move(selection.z);
      state.z_score = selection.score;
      state.z_log.push_back({state.global_step, state.episode, state.z.norm(), selection.score,
                             state.coverage(), selection.fallback});
    }
    const ActionId action = exploration_action(strategy, model, state.state, state.z, rng);
    const StateId next = mdp.sample_next(state.state, action, rng);
    buffer.push({state.state, action, next, state.episode_step});
    mark(next);
    state.state = next;
    ++state.global_step;
    ++state.episode_step;

    state.train_credit += train_ratio;
    while (state.train_credit >= 1.0) {
      state.train_credit -= 1.0;
      if (train_hook) train_hook(state.global_step);
    }
    if (state.episode_step == spec.horizon) {
      const auto distinct = std::count(state.episode_visited.begin(), state.episode_visited.end(), 1);
      state.episode_log.push_back({state.episode, state.global_step, static_cast<int>(distinct), state.coverage()});
      ++state.episode;
      state.episode_step = 0;
    }
  }
}

double coverage(std::span<const Transition> transitions, int n_states) {
  if (n_states < 1) throw std::invalid_argument("coverage: n_states must be positive");
  std::vector<char> seen(static_cast<std::size_t>(n_states), 0);
  for (const auto& t : transitions) {
    seen.at(t.state) = 1;
    seen.at(t.next_state) = 1;
  }
  return static_cast<double>(std::count(seen.begin(), seen.end(), 1)) / n_states;
}

double coverage(const ReplayBuffer& buffer, int n_states) {
  const auto items = buffer.contents();
  return coverage(items, n_states);
}

}  // namespace fbee
