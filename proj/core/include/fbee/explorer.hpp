#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fbee/mdp.hpp"
#include "fbee/models.hpp"
#include "fbee/replay_buffer.hpp"

namespace fbee {

enum class ExplorationKind { FbeeQ, FbeeF, FbRandomZ, RandomAction };

std::string to_string(ExplorationKind kind);
ExplorationKind exploration_kind_from_string(const std::string& name);

struct ExplorationStrategy {
  ExplorationKind kind = ExplorationKind::FbeeQ;
  int z_update_period = 10;
  int n_z_candidates = 64;
  int n_score_states = 128;
  double epsilon = 0.05;
  /// Score candidates at the agent's current state instead of buffer samples.
  bool score_at_current_state = false;

  void validate() const;
  friend bool operator==(const ExplorationStrategy&, const ExplorationStrategy&) = default;
};

void to_json(nlohmann::json& j, const ExplorationStrategy& s);
void from_json(const nlohmann::json& j, ExplorationStrategy& s);

struct ZSelection {
  Eigen::VectorXd z;
  std::vector<double> scores;  // one per candidate; empty when nothing was scored
  int chosen = -1;             // index into scores, -1 when unscored
  double score = 0.0;
  bool fallback = false;  // empty buffer, sphere sample returned
};

/// Mean over the score states (weighted by multiplicity) of the Q-variance
/// (fbee_q) or of trace(Cov[F]) (fbee_f) at each state's greedy action.
double exploration_score(const ForwardModel& model, ExplorationKind kind, const Eigen::VectorXd& z,
                         std::span<const StateId> states, std::span<const int> counts);

/// Picks the exploration embedding z^E. fbee variants score n_z_candidates
/// sphere samples and return the first maximizer; fb_random_z returns one
/// sphere sample; random_action returns a zero vector without drawing.
/// `model` is never queried by random_action or fb_random_z.
ZSelection select_exploration_z(const ForwardModel& model, const ReplayBuffer& buffer,
                                const ExplorationStrategy& strategy, Rng& rng,
                                std::optional<StateId> current_state = std::nullopt);

/// Epsilon-greedy action w.r.t. <F_mean(s, a, z), z>; uniform for random_action.
ActionId exploration_action(const ExplorationStrategy& strategy, const ForwardModel& model,
                            StateId state, const Eigen::VectorXd& z, Rng& rng);

struct ZLogEntry {
  std::int64_t global_step = 0;
  std::int64_t episode = 0;
  double z_norm = 0.0;
  double score = 0.0;
  double coverage = 0.0;
  bool fallback = false;
};

struct EpisodeLogEntry {
  std::int64_t episode = 0;
  std::int64_t global_step = 0;  // step count at the end of the episode
  int distinct_states = 0;
  double coverage = 0.0;  // cumulative fraction of states seen so far
};

/// Resumable state of the data-collection loop.
struct CollectionState {
  std::int64_t global_step = 0;
  std::int64_t episode = 0;
  int episode_step = 0;
  StateId state = 0;
  Eigen::VectorXd z;
  double z_score = 0.0;
  double train_credit = 0.0;
  std::vector<char> visited;          // cumulative, per state
  std::vector<char> episode_visited;  // current episode, per state
  std::vector<ZLogEntry> z_log;
  std::vector<EpisodeLogEntry> episode_log;

  explicit CollectionState(int n_states = 0);
  double coverage() const;
};

using TrainHook = std::function<void(std::int64_t global_step)>;

/// Runs n_steps environment steps: episodes of spec.horizon steps, z^E
/// refreshed at every episode start and every z_update_period steps, one
/// train_hook call per 1/train_ratio steps, every transition pushed to the
/// buffer. The selector and the hook see the buffer as it is at that step.
void collect(const DiscreteMdp& mdp, const EpisodeSpec& spec, const ForwardModel& model,
             const ExplorationStrategy& strategy, ReplayBuffer& buffer, CollectionState& state,
             Rng& rng, std::int64_t n_steps, double train_ratio = 0.5,
             const TrainHook& train_hook = {});

/// Fraction of states that appear as a state or next state.
double coverage(const ReplayBuffer& buffer, int n_states);
double coverage(std::span<const Transition> transitions, int n_states);

}  // namespace fbee
