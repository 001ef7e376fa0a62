#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbee/mdp.hpp"

namespace fbee {

enum class EnvKind { FourRoom, Chain, Random };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);

/// Serializable environment description. Keys in the text form:
/// kind, side, slip_prob, n, n_states, n_actions, branching, seed, gamma,
/// horizon, top_left_start.
struct EnvParams {
  EnvKind kind = EnvKind::FourRoom;
  int side = 11;
  double slip_prob = 0.05;
  int n = 10;
  int n_states = 10;
  int n_actions = 2;
  int branching = 4;
  std::uint64_t seed = 0;
  double gamma = 0.98;
  int horizon = 100;
  bool top_left_start = true;

  friend bool operator==(const EnvParams&, const EnvParams&) = default;
};

void to_json(nlohmann::json& j, const EnvParams& p);
void from_json(const nlohmann::json& j, EnvParams& p);

enum FourRoomAction : ActionId { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Geometry of the side x side four-room grid. The middle row and column are
/// walls except for one doorway cell per wall segment.
class FourRoomLayout {
 public:
  explicit FourRoomLayout(int side);

  int side() const { return side_; }
  int n_cells() const { return side_ * side_; }
  StateId cell(int row, int col) const { return row * side_ + col; }
  int row_of(StateId s) const { return s / side_; }
  int col_of(StateId s) const { return s % side_; }

  bool is_wall(StateId s) const;
  bool is_doorway(StateId s) const;
  /// 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right; -1 for walls
  /// and doorways.
  int room_of(StateId s) const;
  const std::vector<StateId>& doorways() const { return doorways_; }
  std::vector<StateId> room_cells(int room) const;
  std::vector<StateId> free_cells() const;
  /// Deterministic successor of a move; blocked moves keep the cell.
  StateId move(StateId s, ActionId action) const;

 private:
  int side_;
  int mid_;
  std::vector<StateId> doorways_;
};

struct Environment {
  std::string name;
  EnvParams params;
  DiscreteMdp mdp;
  std::optional<FeatureMap> features;
  EpisodeSpec episode;
  std::optional<FourRoomLayout> layout;
};

/// Four-room gridworld; see FourRoomLayout. Slipping replaces the chosen
/// action by a uniformly random one. Starts are restricted to the top-left
/// room and the feature map is the normalized (x, y) position.
Environment build_four_room(int side, double slip_prob, double gamma = 0.98, int horizon = 100);

enum ChainAction : ActionId { kChainLeft = 0, kChainRight = 1 };

/// n-state chain with reflecting ends; every episode starts in state 0.
DiscreteMdp build_chain(int n, double gamma);

/// Each (s, a) moves to `branching` distinct, uniformly chosen successors
/// with Dirichlet(1) weights. Initial distribution is uniform.
DiscreteMdp build_random_mdp(int n_states, int n_actions, int branching, std::uint64_t seed,
                             double gamma = 0.98);

Environment make_environment(const EnvParams& params);

}  // namespace fbee
