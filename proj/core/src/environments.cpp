#include "fbee/environments.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fbee {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::FourRoom: return "four_room";
    case EnvKind::Chain: return "chain";
    case EnvKind::Random: return "random";
  }
  return "unknown";
}

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "four_room") return EnvKind::FourRoom;
  if (name == "chain") return EnvKind::Chain;
  if (name == "random") return EnvKind::Random;
  throw std::invalid_argument("unknown environment kind: " + name);
}

void to_json(nlohmann::json& j, const EnvParams& p) {
  j = nlohmann::json{{"kind", to_string(p.kind)},
                     {"side", p.side},
                     {"slip_prob", p.slip_prob},
                     {"n", p.n},
                     {"n_states", p.n_states},
                     {"n_actions", p.n_actions},
                     {"branching", p.branching},
                     {"seed", p.seed},
                     {"gamma", p.gamma},
                     {"horizon", p.horizon},
                     {"top_left_start", p.top_left_start}};
}

void from_json(const nlohmann::json& j, EnvParams& p) {
  EnvParams d;
  p.kind = env_kind_from_string(j.value("kind", to_string(d.kind)));
  p.side = j.value("side", d.side);
  p.slip_prob = j.value("slip_prob", d.slip_prob);
  p.n = j.value("n", d.n);
  p.n_states = j.value("n_states", d.n_states);
  p.n_actions = j.value("n_actions", d.n_actions);
  p.branching = j.value("branching", d.branching);
  p.seed = j.value("seed", d.seed);
  p.gamma = j.value("gamma", d.gamma);
  p.horizon = j.value("horizon", d.horizon);
  p.top_left_start = j.value("top_left_start", d.top_left_start);
}

FourRoomLayout::FourRoomLayout(int side) : side_(side), mid_(side / 2) {
  if (side < 5 || side % 2 == 0) {
    throw std::invalid_argument("four-room side must be odd and >= 5");
  }
  const int offset = (mid_ - 1) / 2;
  doorways_ = {cell(offset, mid_), cell(mid_, offset), cell(mid_, mid_ + 1 + offset),
               cell(mid_ + 1 + offset, mid_)};
  std::sort(doorways_.begin(), doorways_.end());
}

bool FourRoomLayout::is_doorway(StateId s) const {
  return std::find(doorways_.begin(), doorways_.end(), s) != doorways_.end();
}

bool FourRoomLayout::is_wall(StateId s) const {
  const int r = row_of(s);
  const int c = col_of(s);
  return (r == mid_ || c == mid_) && !is_doorway(s);
}

int FourRoomLayout::room_of(StateId s) const {
  const int r = row_of(s);
  const int c = col_of(s);
  if (r == mid_ || c == mid_) return -1;
  return (r > mid_ ? 2 : 0) + (c > mid_ ? 1 : 0);
}

std::vector<StateId> FourRoomLayout::room_cells(int room) const {
  std::vector<StateId> cells;
  for (StateId s = 0; s < n_cells(); ++s) {
    if (room_of(s) == room) cells.push_back(s);
  }
  return cells;
}

std::vector<StateId> FourRoomLayout::free_cells() const {
  std::vector<StateId> cells;
  for (StateId s = 0; s < n_cells(); ++s) {
    if (!is_wall(s)) cells.push_back(s);
  }
  return cells;
}

StateId FourRoomLayout::move(StateId s, ActionId action) const {
  if (is_wall(s)) return s;
  int r = row_of(s);
  int c = col_of(s);
  switch (action) {
    case kUp: --r; break;
    case kDown: ++r; break;
    case kLeft: --c; break;
    case kRight: ++c; break;
    default: throw std::out_of_range("four-room action out of range");
  }
  if (r < 0 || r >= side_ || c < 0 || c >= side_) return s;
  const StateId next = cell(r, c);
  return is_wall(next) ? s : next;
}

Environment build_four_room(int side, double slip_prob, double gamma, int horizon) {
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) {
    throw std::invalid_argument("slip_prob must lie in [0, 1)");
  }
  FourRoomLayout layout(side);
  const int n = layout.n_cells();
  constexpr int kActions = 4;
  std::vector<double> transition(static_cast<std::size_t>(n) * kActions * n, 0.0);
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a = 0; a < kActions; ++a) {
      double* p = &transition[(static_cast<std::size_t>(s) * kActions + a) * n];
      p[layout.move(s, a)] += 1.0 - slip_prob;
      for (ActionId b = 0; b < kActions; ++b) p[layout.move(s, b)] += slip_prob / kActions;
    }
  }
  const auto free = layout.free_cells();
  std::vector<double> initial(static_cast<std::size_t>(n), 0.0);
  for (StateId s : free) initial[s] = 1.0 / static_cast<double>(free.size());

  std::vector<double> coords(static_cast<std::size_t>(n) * 2);
  for (StateId s = 0; s < n; ++s) {
    coords[2 * s] = static_cast<double>(layout.col_of(s)) / (side - 1);
    coords[2 * s + 1] = static_cast<double>(layout.row_of(s)) / (side - 1);
  }

  EnvParams params;
  params.kind = EnvKind::FourRoom;
  params.side = side;
  params.slip_prob = slip_prob;
  params.gamma = gamma;
  params.horizon = horizon;
  params.top_left_start = true;

  EpisodeSpec spec{horizon, layout.room_cells(0)};
  return Environment{"four_room", params,
                     DiscreteMdp(n, kActions, std::move(transition), std::move(initial), gamma),
                     FeatureMap(2, std::move(coords)), std::move(spec), layout};
}

DiscreteMdp build_chain(int n, double gamma) {
  if (n < 2) throw std::invalid_argument("chain needs n >= 2");
  constexpr int kActions = 2;
  std::vector<double> transition(static_cast<std::size_t>(n) * kActions * n, 0.0);
  for (StateId s = 0; s < n; ++s) {
    transition[(static_cast<std::size_t>(s) * kActions + kChainLeft) * n + std::max(s - 1, 0)] = 1.0;
    transition[(static_cast<std::size_t>(s) * kActions + kChainRight) * n + std::min(s + 1, n - 1)] =
        1.0;
  }
  std::vector<double> initial(static_cast<std::size_t>(n), 0.0);
  initial[0] = 1.0;
  return DiscreteMdp(n, kActions, std::move(transition), std::move(initial), gamma);
}

DiscreteMdp build_random_mdp(int n_states, int n_actions, int branching, std::uint64_t seed,
                             double gamma) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("random MDP needs positive sizes");
  if (branching < 1 || branching > n_states) {
    throw std::invalid_argument("random MDP branching must lie in [1, n_states]");
  }
  Rng rng = derive_rng(seed, "random_mdp");
  std::exponential_distribution<double> weight(1.0);
  std::vector<double> transition(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  std::vector<StateId> order(static_cast<std::size_t>(n_states));
  for (StateId s = 0; s < n_states; ++s) {
    for (ActionId a = 0; a < n_actions; ++a) {
      std::iota(order.begin(), order.end(), 0);
      // Partial Fisher-Yates: the first `branching` entries are the support.
      for (int i = 0; i < branching; ++i) {
        std::uniform_int_distribution<int> pick(i, n_states - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      double* p = &transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states];
      double total = 0.0;
      for (int i = 0; i < branching; ++i) {
        const double w = weight(rng) + 1e-12;
        p[order[i]] = w;
        total += w;
      }
      for (int i = 0; i < branching; ++i) p[order[i]] /= total;
    }
  }
  std::vector<double> initial(static_cast<std::size_t>(n_states), 1.0 / n_states);
  return DiscreteMdp(n_states, n_actions, std::move(transition), std::move(initial), gamma);
}

Environment make_environment(const EnvParams& params) {
  switch (params.kind) {
    case EnvKind::FourRoom: {
      auto env = build_four_room(params.side, params.slip_prob, params.gamma, params.horizon);
      if (!params.top_left_start) env.episode.start_region.clear();
      env.params = params;
      return env;
    }
    case EnvKind::Chain:
      return Environment{"chain", params, build_chain(params.n, params.gamma), std::nullopt,
                         EpisodeSpec{params.horizon, {}}, std::nullopt};
    case EnvKind::Random:
      return Environment{"random",
                         params,
                         build_random_mdp(params.n_states, params.n_actions, params.branching,
                                          params.seed, params.gamma),
                         std::nullopt,
                         EpisodeSpec{params.horizon, {}},
                         std::nullopt};
  }
  throw std::invalid_argument("unknown environment kind");
}

}  // namespace fbee
