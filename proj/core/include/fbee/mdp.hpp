#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fbee/rng.hpp"

namespace fbee {

using StateId = int;
using ActionId = int;

/// Finite reward-free MDP with a dense transition tensor P[s][a][s'].
///
/// Rows and the initial distribution are validated at construction; the
/// object is immutable afterwards and safe to share across threads.
class DiscreteMdp {
 public:
  static constexpr double kProbabilityTolerance = 1e-9;

  DiscreteMdp(int n_states, int n_actions, std::vector<double> transition,
              std::vector<double> initial_distribution, double gamma);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int n_pairs() const { return n_states_ * n_actions_; }
  double gamma() const { return gamma_; }

  /// P[state][action] as a probability vector over next states.
  std::span<const double> row(StateId state, ActionId action) const;
  double probability(StateId state, ActionId action, StateId next) const;
  std::span<const double> initial_distribution() const { return initial_; }
  /// Row-major (s, a, s') tensor.
  std::span<const double> transition_tensor() const { return transition_; }

  bool valid_state(StateId s) const { return s >= 0 && s < n_states_; }
  bool valid_action(ActionId a) const { return a >= 0 && a < n_actions_; }

  /// Samples s' ~ P[state][action]. Consumes exactly one uniform draw.
  StateId sample_next(StateId state, ActionId action, Rng& rng) const;

 private:
  struct Outcome {
    StateId next;
    double cumulative;
  };

  int n_states_;
  int n_actions_;
  double gamma_;
  std::vector<double> transition_;
  std::vector<double> initial_;
  // Sparse cumulative rows for sampling; offsets index into outcomes_.
  std::vector<Outcome> outcomes_;
  std::vector<std::size_t> offsets_;
};

struct Transition {
  StateId state = 0;
  ActionId action = 0;
  StateId next_state = 0;
  int episode_step = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Deterministic state -> R^feature_dim map used as the backward-network input
/// when the reward prior is enabled.
class FeatureMap {
 public:
  FeatureMap(int feature_dim, std::vector<double> values);

  int feature_dim() const { return feature_dim_; }
  int n_states() const { return static_cast<int>(values_.size()) / feature_dim_; }
  std::span<const double> operator()(StateId state) const;

 private:
  int feature_dim_;
  std::vector<double> values_;
};

struct EpisodeSpec {
  int horizon = 100;
  /// When non-empty, episodes start from the initial distribution restricted
  /// to these states and renormalized.
  std::vector<StateId> start_region;
};

/// Initial distribution restricted to spec.start_region (or unrestricted).
/// Throws if the restriction has no probability mass.
std::vector<double> start_distribution(const DiscreteMdp& mdp, const EpisodeSpec& spec);

/// Samples an index from a probability vector with one uniform draw.
int sample_index(std::span<const double> probabilities, Rng& rng);

StateId step(const DiscreteMdp& mdp, StateId state, ActionId action, Rng& rng);

/// Chooses an action given the current state and the step within the episode.
using ActionSelector = std::function<ActionId(StateId state, int episode_step, Rng& rng)>;

/// One episode of exactly spec.horizon transitions. The selector is queried
/// every step, so callers may switch behaviour mid-episode.
std::vector<Transition> rollout(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                const ActionSelector& policy, Rng& rng);

}  // namespace fbee
