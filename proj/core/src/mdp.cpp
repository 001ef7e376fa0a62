#include "fbee/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fbee {
namespace {

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(what + ": negative or non-finite probability");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > DiscreteMdp::kProbabilityTolerance) {
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(total));
  }
}

}  // namespace

DiscreteMdp::DiscreteMdp(int n_states, int n_actions, std::vector<double> transition,
                         std::vector<double> initial_distribution, double gamma)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      transition_(std::move(transition)),
      initial_(std::move(initial_distribution)) {
  if (n_states_ < 1 || n_actions_ < 1) {
    throw std::invalid_argument("DiscreteMdp: n_states and n_actions must be positive");
  }
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) {
    throw std::invalid_argument("DiscreteMdp: gamma must lie in (0, 1)");
  }
  const auto expected = static_cast<std::size_t>(n_states_) * n_actions_ * n_states_;
  if (transition_.size() != expected) {
    throw std::invalid_argument("DiscreteMdp: transition tensor has wrong size");
  }
  if (initial_.size() != static_cast<std::size_t>(n_states_)) {
    throw std::invalid_argument("DiscreteMdp: initial distribution has wrong size");
  }
  check_distribution(initial_, "initial distribution");

  offsets_.reserve(static_cast<std::size_t>(n_pairs()) + 1);
  offsets_.push_back(0);
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      auto p = row(s, a);
      check_distribution(p, "P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
      double cumulative = 0.0;
      for (int next = 0; next < n_states_; ++next) {
        if (p[next] > 0.0) {
          cumulative += p[next];
          outcomes_.push_back({next, cumulative});
        }
      }
      outcomes_.back().cumulative = 1.0;
      offsets_.push_back(outcomes_.size());
    }
  }
}

std::span<const double> DiscreteMdp::row(StateId state, ActionId action) const {
  const auto offset = (static_cast<std::size_t>(state) * n_actions_ + action) * n_states_;
  return std::span<const double>(transition_).subspan(offset, n_states_);
}

double DiscreteMdp::probability(StateId state, ActionId action, StateId next) const {
  return row(state, action)[next];
}

StateId DiscreteMdp::sample_next(StateId state, ActionId action, Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto pair = static_cast<std::size_t>(state) * n_actions_ + action;
  auto first = outcomes_.begin() + static_cast<std::ptrdiff_t>(offsets_[pair]);
  auto last = outcomes_.begin() + static_cast<std::ptrdiff_t>(offsets_[pair + 1]);
  auto it = std::upper_bound(first, last, u,
                             [](double value, const Outcome& o) { return value < o.cumulative; });
  if (it == last) --it;
  return it->next;
}

FeatureMap::FeatureMap(int feature_dim, std::vector<double> values)
    : feature_dim_(feature_dim), values_(std::move(values)) {
  if (feature_dim_ < 1) throw std::invalid_argument("FeatureMap: feature_dim must be positive");
  if (values_.empty() || values_.size() % static_cast<std::size_t>(feature_dim_) != 0) {
    throw std::invalid_argument("FeatureMap: value table is not n_states x feature_dim");
  }
}

std::span<const double> FeatureMap::operator()(StateId state) const {
  if (state < 0 || state >= n_states()) throw std::out_of_range("FeatureMap: state out of range");
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(state) * feature_dim_,
                                                  feature_dim_);
}

std::vector<double> start_distribution(const DiscreteMdp& mdp, const EpisodeSpec& spec) {
  auto rho = std::vector<double>(mdp.initial_distribution().begin(),
                                 mdp.initial_distribution().end());
  if (spec.start_region.empty()) return rho;
  std::vector<double> restricted(rho.size(), 0.0);
  double mass = 0.0;
  for (StateId s : spec.start_region) {
    if (!mdp.valid_state(s)) throw std::out_of_range("start_region: state out of range");
    if (restricted[s] == 0.0) {
      restricted[s] = rho[s];
      mass += rho[s];
    }
  }
  if (!(mass > 0.0)) throw std::invalid_argument("start_region carries no initial mass");
  for (double& v : restricted) v /= mass;
  return restricted;
}

int sample_index(std::span<const double> probabilities, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cumulative += probabilities[i];
    last_positive = static_cast<int>(i);
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

StateId step(const DiscreteMdp& mdp, StateId state, ActionId action, Rng& rng) {
  if (!mdp.valid_state(state)) throw std::out_of_range("step: state out of range");
  if (!mdp.valid_action(action)) throw std::out_of_range("step: action out of range");
  return mdp.sample_next(state, action, rng);
}

std::vector<Transition> rollout(const DiscreteMdp& mdp, const EpisodeSpec& spec,
                                const ActionSelector& policy, Rng& rng) {
  if (spec.horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  const auto rho = start_distribution(mdp, spec);
  std::vector<Transition> episode;
  episode.reserve(static_cast<std::size_t>(spec.horizon));
  StateId state = sample_index(rho, rng);
  for (int t = 0; t < spec.horizon; ++t) {
    const ActionId action = policy(state, t, rng);
    const StateId next = step(mdp, state, action, rng);
    episode.push_back({state, action, next, t});
    state = next;
  }
  return episode;
}

}  // namespace fbee
